//! Monte-Carlo estimates over coupled `(X0, X1)` pairs.

use super::{denoise, VelocityField};
use crate::dist::{LatentSpec, TargetSpec};
use crate::error::{check_unit_interval, Error, Result};
use crate::grid::{interp_et, Grid};
use crate::rng::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    /// `X0` and `X1` drawn independently.
    Independent,
    /// `X1 = m + s X0`; only defined for a standard Gaussian latent and an
    /// isotropic Gaussian target of equal dimension.
    GaussianOt,
}

fn check_coupling(latent: &LatentSpec, target: &TargetSpec, coupling: Coupling) -> Result<()> {
    target.validate()?;
    let latent_len: usize = latent.shape().iter().product();
    let target_len: usize = target.shape().iter().product();
    if latent_len != target_len {
        return Err(Error::shape(latent.shape(), &target.shape()));
    }
    if coupling == Coupling::GaussianOt {
        let ok = matches!(latent, LatentSpec::IsotropicGaussian { .. })
            && matches!(target, TargetSpec::IsotropicGaussian { .. });
        if !ok {
            return Err(Error::Invalid(
                "Gaussian OT coupling needs a Gaussian latent and an isotropic Gaussian target".into(),
            ));
        }
    }
    Ok(())
}

/// One draw from the coupling. Caller validates the combination.
pub fn draw_coupled_pair(
    latent: &LatentSpec,
    target: &TargetSpec,
    coupling: Coupling,
    rng: &mut RngState,
) -> (Grid, Grid) {
    let x0 = latent.sample_one(rng);
    let x1 = match (coupling, target) {
        (Coupling::GaussianOt, TargetSpec::IsotropicGaussian { mean, scale }) => {
            let data = x0.data().iter().zip(mean).map(|(&x, &m)| m + scale * x).collect();
            Grid::from_parts(data, x0.shape().to_vec())
        }
        _ => {
            let x1 = target.sample_one(rng);
            let shape = x0.shape().to_vec();
            Grid::from_parts(x1.into_data(), shape)
        }
    };
    (x0, x1)
}

/// Estimates `E ||D_t(X_t) - X1||^2` over `n_samples` coupled pairs.
pub fn denoising_loss_mc(
    field: &dyn VelocityField,
    latent: &LatentSpec,
    target: &TargetSpec,
    coupling: Coupling,
    t: f64,
    n_samples: usize,
    rng: &mut RngState,
) -> Result<f64> {
    check_unit_interval("t", t)?;
    check_coupling(latent, target, coupling)?;
    if n_samples == 0 {
        return Err(Error::Invalid("n_samples must be at least 1".into()));
    }
    let mut total = 0.0;
    for _ in 0..n_samples {
        let (x0, x1) = draw_coupled_pair(latent, target, coupling, rng);
        let xt = interp_et(&x0, &x1, t)?;
        let d = denoise(field, t, &xt)?;
        total += d.sub(&x1)?.norm_sq();
    }
    Ok(total / n_samples as f64)
}

/// Estimates `E_{x ~ P_t} ||a_t(x) - b_t(x)||^2`.
#[allow(clippy::too_many_arguments)]
pub fn fm_gap(
    field_a: &dyn VelocityField,
    field_b: &dyn VelocityField,
    latent: &LatentSpec,
    target: &TargetSpec,
    coupling: Coupling,
    t: f64,
    n_samples: usize,
    rng: &mut RngState,
) -> Result<f64> {
    check_unit_interval("t", t)?;
    if field_a.dim() != field_b.dim() {
        return Err(Error::shape(&[field_a.dim()], &[field_b.dim()]));
    }
    check_coupling(latent, target, coupling)?;
    if n_samples == 0 {
        return Err(Error::Invalid("n_samples must be at least 1".into()));
    }
    let mut total = 0.0;
    for _ in 0..n_samples {
        let (x0, x1) = draw_coupled_pair(latent, target, coupling, rng);
        let xt = interp_et(&x0, &x1, t)?;
        let a = field_a.eval(t, &xt)?;
        let b = field_b.eval(t, &xt)?;
        total += a.sub(&b)?.norm_sq();
    }
    Ok(total / n_samples as f64)
}
