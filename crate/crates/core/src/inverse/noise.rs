use super::ops::{op_apply, DegradationOp};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::RngState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    Laplace { scale: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::Domain { name: "sigma", value: sigma, domain: "[0, inf)" })
            }
            NoiseModel::Laplace { scale } if !(scale > 0.0 && scale.is_finite()) => {
                Err(Error::Domain { name: "scale", value: scale, domain: "(0, inf)" })
            }
            _ => Ok(()),
        }
    }

    pub fn draw(&self, rng: &mut RngState) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma * rng.normal(),
            NoiseModel::Laplace { scale } => rng.laplace(scale),
        }
    }
}

/// `y = Hx + noise`. For masks the noise only touches observed pixels.
pub fn degrade(x: &Grid, op: &DegradationOp, noise: &NoiseModel, rng: &mut RngState) -> Result<Grid> {
    noise.validate()?;
    let mut y = op_apply(op, x)?;
    if let NoiseModel::Gaussian { sigma } = noise {
        if *sigma == 0.0 {
            return Ok(y);
        }
    }
    let keep = if op.is_mask() {
        let (_, h, w) = y.image_dims()?;
        op.keeps(h, w)
    } else {
        None
    };
    let plane = keep.as_ref().map_or(1, |k| k.len());
    for (i, v) in y.data_mut().iter_mut().enumerate() {
        let xi = noise.draw(rng);
        if keep.as_ref().is_none_or(|k| k[i % plane]) {
            *v += xi;
        }
    }
    Ok(y)
}
