use crate::error::{Error, Result};
use crate::grid::Grid;

/// Isotropic Gaussian sampled at integer offsets from the center, normalized to sum 1.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Grid> {
    if size.is_multiple_of(2) {
        return Err(Error::Invalid(format!("kernel size must be odd, got {size}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain { name: "sigma_b", value: sigma, domain: "(0, inf)" });
    }
    let c = (size / 2) as f64;
    let mut data = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            data.push((-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = data.iter().sum();
    Ok(Grid::from_parts(data.into_iter().map(|v| v / total).collect(), vec![size, size]))
}

/// Euclidean projection onto `{k : k >= 0, sum k = 1}` (sort-and-threshold).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}
