//! Scoring files on disk against references, for `pnpflow eval`.

use std::path::Path;

use crate::bench::csv_io::read_points_csv;
use crate::bench::netpbm::read_netpbm;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::metrics::{mse, psnr_from_mse, ssim, DEFAULT_PEAK, SSIM_WINDOW};

#[derive(Clone, Debug, PartialEq)]
pub struct PairScore {
    pub name: String,
    pub mse: f64,
    pub psnr: f64,
    pub ssim: Option<f64>,
}

fn is_csv(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()) == Some("csv")
}

fn score(name: String, reference: &Grid, estimate: &Grid) -> Result<PairScore> {
    let m = mse(estimate, reference)?;
    let s = match reference.image_dims() {
        Ok((_, h, w)) if reference.shape().len() > 1 && h >= SSIM_WINDOW && w >= SSIM_WINDOW => {
            Some(ssim(estimate, reference, DEFAULT_PEAK)?)
        }
        _ => None,
    };
    Ok(PairScore { name, mse: m, psnr: psnr_from_mse(m, DEFAULT_PEAK), ssim: s })
}

/// Scores two point files row by row, two images, or every image present
/// under the same name in two directories.
pub fn compare_paths(reference: &Path, estimate: &Path) -> Result<Vec<PairScore>> {
    if reference.is_dir() != estimate.is_dir() {
        return Err(Error::Invalid("reference and estimate must both be files or both directories".into()));
    }
    if reference.is_dir() {
        let mut names: Vec<String> = std::fs::read_dir(reference)
            .map_err(|e| Error::io(reference, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".pgm") || n.ends_with(".ppm"))
            .filter(|n| estimate.join(n).is_file())
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(Error::Invalid("no images with matching names".into()));
        }
        return names
            .into_iter()
            .map(|n| score(n.clone(), &read_netpbm(&reference.join(&n))?, &read_netpbm(&estimate.join(&n))?))
            .collect();
    }
    if is_csv(reference) {
        let a = read_points_csv(reference)?;
        let b = read_points_csv(estimate)?;
        if a.len() != b.len() {
            return Err(Error::Invalid(format!("{} reference points but {} estimates", a.len(), b.len())));
        }
        return a.iter().zip(&b).enumerate().map(|(i, (r, e))| score(format!("point {i}"), r, e)).collect();
    }
    let name = estimate.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(vec![score(name, &read_netpbm(reference)?, &read_netpbm(estimate)?)?])
}
