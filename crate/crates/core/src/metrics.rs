//! Image-quality metrics: MSE, PSNR and SSIM.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// PSNR reported for (near-)identical inputs.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Peak for data normalized to `[-1, 1]`.
pub const DEFAULT_PEAK: f64 = 2.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse(a: &Grid, b: &Grid) -> Result<f64> {
    a.same_shape(b)?;
    let total: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(total / a.len() as f64)
}

/// `10 log10(peak^2 / mse)`, capped at [`PSNR_CAP_DB`] once `mse < peak^2 * 1e-10`.
pub fn psnr(a: &Grid, b: &Grid, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::Domain { name: "peak", value: peak, domain: "(0, inf)" });
    }
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse < peak * peak * 1e-10 {
        PSNR_CAP_DB
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            w.push((-(di * di + dj * dj) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
        }
    }
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Mean SSIM over every window position fully inside the image, averaged over channels.
pub fn ssim(a: &Grid, b: &Grid, data_range: f64) -> Result<f64> {
    a.same_shape(b)?;
    if !(data_range > 0.0) {
        return Err(Error::Domain { name: "data_range", value: data_range, domain: "(0, inf)" });
    }
    let (c, h, w) = a.image_dims()?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Invalid(format!("SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")));
    }
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let window = gaussian_window();
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut total = 0.0;
    for ch in 0..c {
        let pa = &a.data()[ch * h * w..(ch + 1) * h * w];
        let pb = &b.data()[ch * h * w..(ch + 1) * h * w];
        let mut channel_sum = 0.0;
        for i in 0..oh {
            for j in 0..ow {
                let (mut mu_a, mut mu_b, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for p in 0..SSIM_WINDOW {
                    for q in 0..SSIM_WINDOW {
                        let wt = window[p * SSIM_WINDOW + q];
                        let (x, y) = (pa[(i + p) * w + j + q], pb[(i + p) * w + j + q]);
                        mu_a += wt * x;
                        mu_b += wt * y;
                        saa += wt * x * x;
                        sbb += wt * y * y;
                        sab += wt * x * y;
                    }
                }
                let var_a = saa - mu_a * mu_a;
                let var_b = sbb - mu_b * mu_b;
                let cov = sab - mu_a * mu_b;
                channel_sum += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            }
        }
        total += channel_sum / (oh * ow) as f64;
    }
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn test_image(seed: u64) -> Grid {
        let mut rng = RngState::new(seed);
        let (h, w) = (24, 20);
        let data = (0..h * w)
            .map(|p| {
                let (i, j) = ((p / w) as f64, (p % w) as f64);
                0.6 * (i / 4.0).sin() * (j / 5.0).cos() + 0.05 * rng.normal()
            })
            .collect();
        Grid::new(data, vec![h, w]).unwrap()
    }

    fn noisy(x: &Grid, sigma: f64, seed: u64) -> Grid {
        let mut rng = RngState::new(seed);
        let data = x.data().iter().map(|v| v + sigma * rng.normal()).collect();
        Grid::new(data, x.shape().to_vec()).unwrap()
    }

    #[test]
    fn mse_cases() {
        let x = test_image(1);
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
        let a = Grid::vector(vec![0.0]).unwrap();
        let b = Grid::vector(vec![2.0]).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 4.0);
        let y = noisy(&x, 0.1, 2);
        let scaled = mse(&x.scale(3.0), &y.scale(3.0)).unwrap();
        assert!((scaled - 9.0 * mse(&x, &y).unwrap()).abs() < 1e-12);
        assert!(mse(&a, &x).is_err());
    }

    #[test]
    fn psnr_cases() {
        let x = test_image(3);
        assert_eq!(psnr(&x, &x, 2.0).unwrap(), PSNR_CAP_DB);
        let a = Grid::vector(vec![0.0, 0.0]).unwrap();
        let b = Grid::vector(vec![2.0, -2.0]).unwrap();
        assert_eq!(psnr(&a, &b, 2.0).unwrap(), 0.0);
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn ssim_of_identical_images_is_one() {
        let x = test_image(4);
        assert_eq!(ssim(&x, &x, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn ssim_of_constant_images() {
        let (u, w) = (0.3, -0.4);
        let a = Grid::filled(&[3, 12, 15], u);
        let b = Grid::filled(&[3, 12, 15], w);
        let c1 = (SSIM_K1 * 2.0f64).powi(2);
        let expected = (2.0 * u * w + c1) / (u * u + w * w + c1);
        assert!((ssim(&a, &b, 2.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_decreases_with_noise() {
        let x = test_image(5);
        let mild = ssim(&x, &noisy(&x, 0.05, 6), 2.0).unwrap();
        let heavy = ssim(&x, &noisy(&x, 0.5, 6), 2.0).unwrap();
        assert!(heavy < mild, "{heavy} vs {mild}");
    }

    #[test]
    fn metrics_are_symmetric() {
        let x = test_image(7);
        let y = noisy(&x, 0.2, 8);
        assert_eq!(mse(&x, &y).unwrap(), mse(&y, &x).unwrap());
        assert_eq!(psnr(&x, &y, 2.0).unwrap(), psnr(&y, &x, 2.0).unwrap());
        assert!((ssim(&x, &y, 2.0).unwrap() - ssim(&y, &x, 2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let x = Grid::zeros(&[10, 30]);
        assert!(ssim(&x, &x, 2.0).is_err());
    }
}
