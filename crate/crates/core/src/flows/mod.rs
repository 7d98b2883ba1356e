//! Velocity fields, the time-dependent denoiser and flow sampling.
//!
//! A velocity field `v_t(x)` drives the flow ODE `dx/dt = v_t(x)` from the
//! latent distribution at `t = 0` to the target at `t = 1`. For a field
//! trained by (conditional) flow matching on straight interpolants, the
//! one-step extrapolation
//!
//! ```text
//! D_t(x) = x + (1 - t) v_t(x)
//! ```
//!
//! is the best estimate of the endpoint `X1` given the interpolant
//! `X_t = x`, which makes it a denoiser indexed by time.

mod analytic;
mod mc;

pub use analytic::{ConstantField, GaussIndepField, GaussOtField, GmmIndepField, ZeroField};
pub use mc::{denoising_loss_mc, draw_coupled_pair, fm_gap, Coupling};

use crate::error::{check_unit_interval, Error, Result};
use crate::grid::Grid;

/// A map `(t, x) -> v_t(x)` on `[0, 1] x R^d`.
///
/// Implementations must be deterministic and return a grid with the shape of `x`.
pub trait VelocityField: Send + Sync {
    /// Number of coordinates the field acts on.
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid>;

    /// Evaluates the field on every row of `rows`, shaped `[n, dim]`.
    fn eval_rows(&self, t: f64, rows: &Grid) -> Result<Grid> {
        let d = self.dim();
        if rows.shape().len() != 2 || rows.shape()[1] != d {
            return Err(Error::shape(&[rows.shape()[0], d], rows.shape()));
        }
        let mut out = Vec::with_capacity(rows.len());
        for row in rows.data().chunks(d) {
            out.extend_from_slice(self.eval(t, &Grid::vector(row.to_vec())?)?.data());
        }
        Grid::new(out, rows.shape().to_vec())
    }
}

impl<F: VelocityField + ?Sized> VelocityField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        (**self).eval(t, x)
    }

    fn eval_rows(&self, t: f64, rows: &Grid) -> Result<Grid> {
        (**self).eval_rows(t, rows)
    }
}

impl<F: VelocityField + ?Sized> VelocityField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        (**self).eval(t, x)
    }

    fn eval_rows(&self, t: f64, rows: &Grid) -> Result<Grid> {
        (**self).eval_rows(t, rows)
    }
}

impl<F: VelocityField + ?Sized> VelocityField for std::sync::Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        (**self).eval(t, x)
    }

    fn eval_rows(&self, t: f64, rows: &Grid) -> Result<Grid> {
        (**self).eval_rows(t, rows)
    }
}

/// Applies a field independently to each of `rows` stacked points, so that
/// a cloud of points `[rows, dim]` can be processed as one grid.
#[derive(Clone, Debug)]
pub struct RowwiseField<F> {
    inner: F,
    rows: usize,
}

impl<F: VelocityField> RowwiseField<F> {
    pub fn new(inner: F, rows: usize) -> Self {
        RowwiseField { inner, rows }
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: VelocityField> VelocityField for RowwiseField<F> {
    fn dim(&self) -> usize {
        self.rows * self.inner.dim()
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        check_dim(self.dim(), x)?;
        let rows = Grid::from_parts(x.data().to_vec(), vec![self.rows, self.inner.dim()]);
        let v = self.inner.eval_rows(t, &rows)?;
        Ok(Grid::from_parts(v.into_data(), x.shape().to_vec()))
    }
}

pub(crate) fn check_dim(field_dim: usize, x: &Grid) -> Result<()> {
    if x.len() == field_dim {
        Ok(())
    } else {
        Err(Error::shape(&[field_dim], &[x.len()]))
    }
}

/// `D_t = Id + (1 - t) v_t` for a given field.
#[derive(Clone, Copy)]
pub struct Denoiser<F> {
    field: F,
}

impl<F: VelocityField> Denoiser<F> {
    pub fn new(field: F) -> Self {
        Denoiser { field }
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn apply(&self, t: f64, x: &Grid) -> Result<Grid> {
        denoise(&self.field, t, x)
    }
}

pub fn denoise(field: &dyn VelocityField, t: f64, x: &Grid) -> Result<Grid> {
    check_unit_interval("t", t)?;
    let v = field.eval(t, x)?;
    x.zip_map(&v, |xi, vi| xi + (1.0 - t) * vi)
}

/// Explicit Euler integration of the flow ODE from `t = 0` to `t = 1`.
pub fn euler_sample(field: &dyn VelocityField, x0: &Grid, n_steps: usize) -> Result<Grid> {
    if n_steps == 0 {
        return Err(Error::Invalid("euler_sample needs at least one step".into()));
    }
    let dt = 1.0 / n_steps as f64;
    let mut x = x0.clone();
    for step in 0..n_steps {
        let t = step as f64 * dt;
        let v = field.eval(t, &x)?;
        x.axpy(dt, &v)?;
        if !x.is_finite() {
            return Err(Error::NonFinite { step, context: format!("Euler state at t = {t}") });
        }
    }
    Ok(x)
}
