//! Linear degradation operators, noise models and data-fidelity terms.

mod fidelity;
mod kernel;
mod noise;
mod ops;

pub use fidelity::{datafit_grad, Fidelity, FidelityKind};
pub use kernel::{gaussian_kernel, project_to_simplex};
pub use noise::{degrade, NoiseModel};
pub use ops::{op_adjoint, op_apply, DegradationOp};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Exact posterior mean for `y = x + noise` with prior `N(m, s^2 I)` and
/// noise `N(0, sigma^2 I)`; for conjugate Gaussians it is also the MAP.
pub fn map_oracle_gaussian_denoise(y: &Grid, prior_mean: &[f64], prior_scale: f64, sigma: f64) -> Result<Grid> {
    if !(sigma > 0.0) {
        return Err(Error::Domain { name: "sigma", value: sigma, domain: "(0, inf)" });
    }
    if !(prior_scale > 0.0) {
        return Err(Error::Domain { name: "prior_scale", value: prior_scale, domain: "(0, inf)" });
    }
    if prior_mean.len() != y.len() {
        return Err(Error::shape(&[y.len()], &[prior_mean.len()]));
    }
    let s2 = prior_scale * prior_scale;
    let n2 = sigma * sigma;
    let data = y.data().iter().zip(prior_mean).map(|(&yi, &m)| (s2 * yi + n2 * m) / (s2 + n2)).collect();
    Ok(Grid::from_parts(data, y.shape().to_vec()))
}
