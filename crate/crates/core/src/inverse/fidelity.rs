use super::ops::{op_adjoint, op_apply, DegradationOp};
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FidelityKind {
    /// `1/2 ||Hx - y||^2`
    GaussianL2,
    /// `1/(2 sigma^2) ||Hx - y||^2`
    WeightedL2 { sigma: f64 },
    /// `||Hx - y||_1`
    LaplaceL1,
}

/// A data-fidelity term `F(x)` for an observation `y` of `Hx`.
#[derive(Clone, Debug)]
pub struct Fidelity {
    kind: FidelityKind,
    op: DegradationOp,
    y: Grid,
    backprojection: Grid,
}

impl Fidelity {
    pub fn new(kind: FidelityKind, op: DegradationOp, y: Grid) -> Result<Self> {
        if let FidelityKind::WeightedL2 { sigma } = kind {
            if !(sigma > 0.0) {
                return Err(Error::Domain {
                    name: "sigma",
                    value: sigma,
                    domain: "(0, inf) for the weighted fidelity",
                });
            }
        }
        let backprojection = op_adjoint(&op, &y)?;
        Ok(Fidelity { kind, op, y, backprojection })
    }

    pub fn kind(&self) -> FidelityKind {
        self.kind
    }

    pub fn op(&self) -> &DegradationOp {
        &self.op
    }

    pub fn observation(&self) -> &Grid {
        &self.y
    }

    /// `H^T y`, the conventional starting iterate.
    pub fn backprojection(&self) -> &Grid {
        &self.backprojection
    }

    pub fn input_shape(&self) -> &[usize] {
        self.backprojection.shape()
    }

    fn l2_weight(&self) -> f64 {
        match self.kind {
            FidelityKind::WeightedL2 { sigma } => 1.0 / (sigma * sigma),
            _ => 1.0,
        }
    }

    pub fn value(&self, x: &Grid) -> Result<f64> {
        let r = op_apply(&self.op, x)?.sub(&self.y)?;
        Ok(match self.kind {
            FidelityKind::LaplaceL1 => r.data().iter().map(|v| v.abs()).sum(),
            _ => 0.5 * self.l2_weight() * r.norm_sq(),
        })
    }

    pub fn gradient(&self, x: &Grid) -> Result<Grid> {
        let r = op_apply(&self.op, x)?.sub(&self.y)?;
        match self.kind {
            FidelityKind::LaplaceL1 => {
                let s = r.map(|v| {
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                });
                op_adjoint(&self.op, &s)
            }
            FidelityKind::GaussianL2 => op_adjoint(&self.op, &r),
            FidelityKind::WeightedL2 { .. } => Ok(op_adjoint(&self.op, &r)?.scale(self.l2_weight())),
        }
    }

    /// `x - gamma * grad F(x)`.
    ///
    /// The quadratic case is evaluated as `(x - c H^T H x) + c H^T y`, so that
    /// `gamma = 1` with an identity operator returns `y` bitwise.
    pub fn gradient_step(&self, x: &Grid, gamma: f64) -> Result<Grid> {
        match self.kind {
            FidelityKind::LaplaceL1 => {
                let g = self.gradient(x)?;
                x.zip_map(&g, |a, b| a - gamma * b)
            }
            _ => {
                let c = gamma * self.l2_weight();
                let hthx = op_adjoint(&self.op, &op_apply(&self.op, x)?)?;
                let mut z = x.zip_map(&hthx, |a, b| a - c * b)?;
                for (zi, &bi) in z.data_mut().iter_mut().zip(self.backprojection.data()) {
                    *zi += c * bi;
                }
                Ok(z)
            }
        }
    }
}

pub fn datafit_grad(fid: &Fidelity, x: &Grid) -> Result<Grid> {
    fid.gradient(x)
}
