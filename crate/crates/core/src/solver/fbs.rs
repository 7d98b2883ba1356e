use super::pnp::{guard, Init};
use crate::error::{check_unit_interval, Error, Result};
use crate::flows::{denoise, VelocityField};
use crate::grid::Grid;
use crate::inverse::Fidelity;

/// Forward-backward splitting with a fixed-time denoiser and no
/// reprojection: `x <- D_t(x - gamma grad F(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FbsConfig {
    pub gamma: f64,
    pub fixed_t: f64,
    pub n_iters: usize,
    pub init: Init,
}

impl FbsConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit_interval("fixed_t", self.fixed_t)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain { name: "gamma", value: self.gamma, domain: "[0, inf)" });
        }
        Ok(())
    }
}

/// Runs [`FbsConfig::n_iters`] iterations. A zero field with `fixed_t = 1`
/// is plain gradient descent on the data term.
pub fn pnp_fbs_solve(config: &FbsConfig, fid: &Fidelity, field: &dyn VelocityField) -> Result<Grid> {
    config.validate()?;
    let mut x = match &config.init {
        Init::Backprojection => fid.backprojection().clone(),
        Init::Zero => Grid::zeros(fid.input_shape()),
        Init::Given(x) => x.clone(),
    };
    if x.shape() != fid.input_shape() {
        return Err(Error::shape(fid.input_shape(), x.shape()));
    }
    for n in 0..config.n_iters {
        let z = fid.gradient_step(&x, config.gamma)?;
        x = denoise(field, config.fixed_t, &z)?;
        guard(&x, n)?;
    }
    Ok(x)
}
