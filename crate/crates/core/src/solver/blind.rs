use super::pnp::{guard, step_detailed, SolveConfig, SolveTrace, StepRecord};
use crate::dist::LatentSpec;
use crate::error::{Error, Result};
use crate::flows::VelocityField;
use crate::grid::Grid;
use crate::inverse::{op_apply, project_to_simplex, DegradationOp, Fidelity, FidelityKind};
use crate::rng::RngState;
use crate::training::{AdamConfig, AdamState};

#[derive(Clone, Debug, PartialEq)]
pub struct BlindConfig {
    pub solve: SolveConfig,
    /// Odd side length of the learned kernel.
    pub kernel_size: usize,
    pub kernel_lr: f64,
    /// Adam updates of the kernel after every image step.
    pub kernel_steps: usize,
}

impl BlindConfig {
    pub fn new(solve: SolveConfig, kernel_size: usize) -> Self {
        BlindConfig { solve, kernel_size, kernel_lr: 1e-2, kernel_steps: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct BlindOutcome {
    pub image: Grid,
    pub kernel: Grid,
    /// `||y - k_0 * x_1||` with the delta kernel and the first image iterate.
    pub initial_residual: f64,
    /// `||y - k_n * x_n||` after each kernel update.
    pub residuals: Vec<f64>,
    /// Largest `max(|sum k - 1|, -min k)` seen over all kernel iterates.
    pub max_simplex_violation: f64,
    pub trace: SolveTrace,
}

impl BlindOutcome {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&self.initial_residual)
    }
}

pub fn delta_kernel(size: usize) -> Result<Grid> {
    if size.is_multiple_of(2) || size == 0 {
        return Err(Error::Invalid(format!("kernel size must be odd, got {size}")));
    }
    let mut k = Grid::zeros(&[size, size]);
    k.data_mut()[(size / 2) * size + size / 2] = 1.0;
    Ok(k)
}

pub(crate) fn simplex_violation(k: &[f64]) -> f64 {
    let sum: f64 = k.iter().sum();
    let min = k.iter().copied().fold(f64::INFINITY, f64::min);
    (sum - 1.0).abs().max(-min).max(0.0)
}

/// Gradient of `||k * x - y||^2` with respect to the kernel entries.
fn kernel_gradient(x: &Grid, residual: &Grid, size: usize) -> Result<Grid> {
    let (c, h, w) = x.image_dims()?;
    let center = (size / 2) as isize;
    let mut g = vec![0.0; size * size];
    for a in 0..size {
        for b in 0..size {
            let di = center - a as isize;
            let dj = center - b as isize;
            let mut acc = 0.0;
            for ch in 0..c {
                let xs = &x.data()[ch * h * w..(ch + 1) * h * w];
                let rs = &residual.data()[ch * h * w..(ch + 1) * h * w];
                for i in 0..h {
                    let si = (i as isize + di).rem_euclid(h as isize) as usize;
                    for j in 0..w {
                        let sj = (j as isize + dj).rem_euclid(w as isize) as usize;
                        acc += rs[i * w + j] * xs[si * w + sj];
                    }
                }
            }
            g[a * size + b] = 2.0 * acc;
        }
    }
    Grid::new(g, vec![size, size])
}

/// Joint image and kernel estimation: one plug-and-play step on the image
/// with the current kernel, then Adam on `||y - k * x||^2` followed by a
/// projection of the kernel onto the probability simplex.
pub fn blind_deblur_solve(
    y: &Grid,
    field: &dyn VelocityField,
    latent: &LatentSpec,
    config: &BlindConfig,
) -> Result<BlindOutcome> {
    config.solve.validate()?;
    let size = config.kernel_size;
    let mut kernel = delta_kernel(size)?;
    let (_, h, w) = y.image_dims()?;
    if size > h || size > w {
        return Err(Error::Invalid(format!("kernel of size {size} does not fit a {h}x{w} image")));
    }
    if field.dim() != y.len() {
        return Err(Error::shape(&[field.dim()], y.shape()));
    }
    let mut adam = AdamState::new(AdamConfig::with_lr(config.kernel_lr), size * size)?;
    let mut fid = Fidelity::new(FidelityKind::GaussianL2, DegradationOp::conv_blur(kernel.clone())?, y.clone())?;
    let mut x = config.solve.initial_iterate(&fid)?;
    let root = RngState::new(config.solve.seed);
    let mut trace = SolveTrace::default();
    let mut residuals = Vec::new();
    let mut initial_residual = None;
    let mut max_violation = simplex_violation(kernel.data());
    for (n, t) in config.solve.schedule.times().into_iter().enumerate() {
        let gamma = config.solve.step_size.at(t);
        let detail = step_detailed(
            &x,
            t,
            gamma,
            &fid,
            field,
            latent,
            config.solve.averaging,
            config.solve.clip_noise,
            &root.fork(n as u64),
        )?;
        guard(&detail.output, n)?;
        let step_norm = detail.output.sub(&x)?.norm();
        trace.steps.push(StepRecord { n, t, gamma, step_norm, psnr: None });
        x = detail.output;
        if initial_residual.is_none() {
            initial_residual = Some(op_apply(fid.op(), &x)?.sub(y)?.norm());
        }
        for _ in 0..config.kernel_steps {
            let r = op_apply(fid.op(), &x)?.sub(y)?;
            let g = kernel_gradient(&x, &r, size)?;
            let mut k = kernel.data().to_vec();
            adam.step(&mut k, g.data())?;
            kernel = Grid::new(project_to_simplex(&k), vec![size, size])?;
            max_violation = max_violation.max(simplex_violation(kernel.data()));
            fid = Fidelity::new(FidelityKind::GaussianL2, DegradationOp::conv_blur(kernel.clone())?, y.clone())?;
        }
        residuals.push(op_apply(fid.op(), &x)?.sub(y)?.norm());
    }
    Ok(BlindOutcome {
        image: x,
        kernel,
        initial_residual: initial_residual.unwrap_or(0.0),
        residuals,
        max_simplex_violation: max_violation,
        trace,
    })
}
