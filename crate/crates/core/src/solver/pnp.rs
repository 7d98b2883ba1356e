//! The plug-and-play flow-matching iteration: gradient step on the data
//! term, reprojection onto the flow path, then the time-dependent denoiser.

use super::schedule::{Schedule, StepSize};
use crate::dist::LatentSpec;
use crate::error::{check_unit_interval, Error, Result};
use crate::flows::{denoise, VelocityField};
use crate::grid::Grid;
use crate::inverse::Fidelity;
use crate::metrics::psnr;
use crate::rng::RngState;

/// Iterates with `|x|_inf` above this are treated as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Starting iterate.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum Init {
    /// `H^T y`.
    #[default]
    Backprojection,
    Zero,
    Given(Grid),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub schedule: Schedule,
    pub step_size: StepSize,
    /// Noise draws averaged in each denoising step.
    pub averaging: usize,
    pub seed: u64,
    pub init: Init,
    /// Clamp every latent draw to `[-c, c]` coordinatewise.
    pub clip_noise: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            schedule: Schedule::uniform(100),
            step_size: StepSize::Power { alpha: 0.5 },
            averaging: 5,
            seed: 0,
            init: Init::Backprojection,
            clip_noise: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.step_size.validate()?;
        if self.averaging == 0 {
            return Err(Error::Invalid("averaging count K must be at least 1".into()));
        }
        if let Some(c) = self.clip_noise {
            if !(c > 0.0) {
                return Err(Error::Domain { name: "clip_noise", value: c, domain: "(0, inf)" });
            }
        }
        Ok(())
    }

    pub(crate) fn initial_iterate(&self, fid: &Fidelity) -> Result<Grid> {
        let x = match &self.init {
            Init::Backprojection if fid.backprojection().is_finite() => fid.backprojection().clone(),
            Init::Backprojection | Init::Zero => Grid::zeros(fid.input_shape()),
            Init::Given(x) => x.clone(),
        };
        if x.shape() != fid.input_shape() {
            return Err(Error::shape(fid.input_shape(), x.shape()));
        }
        Ok(x)
    }
}

/// Intermediate quantities of one step, for instrumentation.
#[derive(Clone, Debug)]
pub struct StepDetail {
    /// Gradient-step output.
    pub z: Grid,
    /// Latent draws, one per averaged sample.
    pub noise: Vec<Grid>,
    /// Interpolated denoiser inputs `(1 - t) eps + t z`.
    pub probes: Vec<Grid>,
    pub output: Grid,
}

fn draw_latent(latent: &LatentSpec, shape: &[usize], clip: Option<f64>, rng: &mut RngState) -> Result<Grid> {
    let eps = latent.sample_one(rng);
    if eps.len() != shape.iter().product::<usize>() {
        return Err(Error::shape(shape, latent.shape()));
    }
    let eps = eps.reshape(shape.to_vec())?;
    Ok(match clip {
        Some(c) => eps.map(|v| v.clamp(-c, c)),
        None => eps,
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn step_detailed(
    x: &Grid,
    t: f64,
    gamma: f64,
    fid: &Fidelity,
    field: &dyn VelocityField,
    latent: &LatentSpec,
    averaging: usize,
    clip: Option<f64>,
    rng: &RngState,
) -> Result<StepDetail> {
    check_unit_interval("t", t)?;
    if averaging == 0 {
        return Err(Error::Invalid("averaging count K must be at least 1".into()));
    }
    let z = fid.gradient_step(x, gamma)?;
    let mut noise = Vec::with_capacity(averaging);
    let mut probes = Vec::with_capacity(averaging);
    // running mean, exact when all draws denoise to the same point
    let mut output = Grid::zeros(z.shape());
    for k in 0..averaging {
        let eps = draw_latent(latent, z.shape(), clip, &mut rng.fork(k as u64))?;
        let probe = eps.zip_map(&z, |e, zi| (1.0 - t) * e + t * zi)?;
        let d = denoise(field, t, &probe)?;
        let w = 1.0 / (k + 1) as f64;
        for (m, di) in output.data_mut().iter_mut().zip(d.data()) {
            *m += (di - *m) * w;
        }
        noise.push(eps);
        probes.push(probe);
    }
    Ok(StepDetail { z, noise, probes, output })
}

/// One iteration at time `t` with step size `gamma`, averaging the denoiser
/// over `averaging` latent draws taken from forks `0..averaging` of `rng`.
#[allow(clippy::too_many_arguments)]
pub fn pnp_flow_step(
    x: &Grid,
    t: f64,
    gamma: f64,
    fid: &Fidelity,
    field: &dyn VelocityField,
    latent: &LatentSpec,
    averaging: usize,
    rng: &RngState,
) -> Result<Grid> {
    Ok(step_detailed(x, t, gamma, fid, field, latent, averaging, None, rng)?.output)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub gamma: f64,
    /// `||x_{n+1} - x_n||`
    pub step_norm: f64,
    pub psnr: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    pub steps: Vec<StepRecord>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `sum_n ||x_{n+1} - x_n||`
    pub fn total_variation(&self) -> f64 {
        self.steps.iter().map(|s| s.step_norm).sum()
    }

    /// Running sums of the step norms.
    pub fn cumulative(&self) -> Vec<f64> {
        self.steps
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s.step_norm;
                Some(*acc)
            })
            .collect()
    }
}

pub(crate) fn guard(x: &Grid, step: usize) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::NonFinite { step, context: "solver iterate".into() });
    }
    let max_abs = x.norm_inf();
    if max_abs > DIVERGENCE_BOUND {
        return Err(Error::Diverged { step, max_abs });
    }
    Ok(())
}

/// Runs the full schedule and returns the last iterate with its trace.
pub fn pnp_flow_solve(
    config: &SolveConfig,
    fid: &Fidelity,
    field: &dyn VelocityField,
    latent: &LatentSpec,
) -> Result<(Grid, SolveTrace)> {
    pnp_flow_solve_with(config, fid, field, latent, None, |_, _| Ok(()))
}

/// [`pnp_flow_solve`] with an optional ground truth (for the PSNR column,
/// peak 2) and a per-step observer called with the step index and its detail.
pub fn pnp_flow_solve_with(
    config: &SolveConfig,
    fid: &Fidelity,
    field: &dyn VelocityField,
    latent: &LatentSpec,
    truth: Option<&Grid>,
    mut observe: impl FnMut(usize, &StepDetail) -> Result<()>,
) -> Result<(Grid, SolveTrace)> {
    config.validate()?;
    let mut x = config.initial_iterate(fid)?;
    if field.dim() != x.len() {
        return Err(Error::shape(&[field.dim()], x.shape()));
    }
    let root = RngState::new(config.seed);
    let mut trace = SolveTrace::default();
    for (n, t) in config.schedule.times().into_iter().enumerate() {
        let gamma = config.step_size.at(t);
        let detail =
            step_detailed(&x, t, gamma, fid, field, latent, config.averaging, config.clip_noise, &root.fork(n as u64))?;
        guard(&detail.output, n)?;
        observe(n, &detail)?;
        let step_norm = detail.output.sub(&x)?.norm();
        let psnr = truth.map(|gt| psnr(&detail.output, gt, crate::metrics::DEFAULT_PEAK)).transpose()?;
        trace.steps.push(StepRecord { n, t, gamma, step_norm, psnr });
        x = detail.output;
    }
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{GaussIndepField, ZeroField};
    use crate::inverse::{DegradationOp, FidelityKind};

    fn denoising_fid(y: Vec<f64>) -> Fidelity {
        Fidelity::new(FidelityKind::GaussianL2, DegradationOp::Identity, Grid::vector(y).unwrap()).unwrap()
    }

    #[test]
    fn step_at_one_is_a_gradient_step() {
        let fid = denoising_fid(vec![1.0, 2.0]);
        let field = GaussIndepField::new(vec![7.0, 7.0], 0.5).unwrap();
        let x = Grid::vector(vec![-3.0, 0.5]).unwrap();
        let rng = RngState::new(1);
        let out = pnp_flow_step(&x, 1.0, 0.3, &fid, &field, &LatentSpec::gaussian(2), 3, &rng).unwrap();
        assert_eq!(out, fid.gradient_step(&x, 0.3).unwrap());
    }

    #[test]
    fn time_zero_without_data_step_gives_prior_mean() {
        let fid = denoising_fid(vec![100.0, -100.0]);
        let field = GaussIndepField::new(vec![7.0, 3.0], 0.5).unwrap();
        let x = Grid::vector(vec![42.0, 0.0]).unwrap();
        let out = pnp_flow_step(&x, 0.0, 0.0, &fid, &field, &LatentSpec::gaussian(2), 1, &RngState::new(2)).unwrap();
        assert_eq!(out.data(), &[7.0, 3.0]);
    }

    #[test]
    fn step_replays_bitwise() {
        let fid = denoising_fid(vec![1.0, 2.0]);
        let field = GaussIndepField::new(vec![7.0, 7.0], 0.5).unwrap();
        let x = Grid::vector(vec![0.1, 0.2]).unwrap();
        let run =
            || pnp_flow_step(&x, 0.37, 0.6, &fid, &field, &LatentSpec::gaussian(2), 4, &RngState::new(9)).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn probes_follow_the_interpolation_law() {
        let fid = denoising_fid(vec![1.0, 2.0]);
        let field = GaussIndepField::new(vec![7.0, 7.0], 0.5).unwrap();
        let x = Grid::vector(vec![0.1, 0.2]).unwrap();
        let t = 0.41;
        let d = step_detailed(&x, t, 0.5, &fid, &field, &LatentSpec::gaussian(2), 3, None, &RngState::new(3)).unwrap();
        for (eps, probe) in d.noise.iter().zip(&d.probes) {
            for i in 0..2 {
                assert_eq!(probe.data()[i].to_bits(), ((1.0 - t) * eps.data()[i] + t * d.z.data()[i]).to_bits());
            }
        }
    }

    #[test]
    fn noise_clipping() {
        let fid = denoising_fid(vec![0.0; 64]);
        let d = step_detailed(
            &Grid::zeros(&[64]),
            0.5,
            0.0,
            &fid,
            &ZeroField::new(64),
            &LatentSpec::gaussian(64),
            8,
            Some(0.5),
            &RngState::new(4),
        )
        .unwrap();
        assert!(d.noise.iter().all(|e| e.norm_inf() <= 0.5));
    }

    #[test]
    fn unit_step_size_returns_observation() {
        let y = vec![3.25, -1.5];
        let fid = denoising_fid(y.clone());
        let field = GaussIndepField::new(vec![7.0, 7.0], 0.5).unwrap();
        let config = SolveConfig {
            schedule: Schedule::Uniform { steps: 20, include_endpoint: true },
            step_size: StepSize::Constant(1.0),
            ..SolveConfig::default()
        };
        let (x, trace) = pnp_flow_solve(&config, &fid, &field, &LatentSpec::gaussian(2)).unwrap();
        assert_eq!(x.data(), y.as_slice());
        assert_eq!(trace.len(), 21);
    }

    #[test]
    fn solve_is_deterministic() {
        let fid = denoising_fid(vec![5.0, 9.0]);
        let field = GaussIndepField::new(vec![7.0, 7.0], 0.5).unwrap();
        let config = SolveConfig { schedule: Schedule::uniform(30), ..SolveConfig::default() };
        let a = pnp_flow_solve(&config, &fid, &field, &LatentSpec::gaussian(2)).unwrap();
        let b = pnp_flow_solve(&config, &fid, &field, &LatentSpec::gaussian(2)).unwrap();
        assert_eq!(a, b);
    }

    struct Blowup;

    impl VelocityField for Blowup {
        fn dim(&self) -> usize {
            1
        }

        fn eval(&self, _t: f64, x: &Grid) -> Result<Grid> {
            Ok(x.map(|v| 1e3 * (v.abs() + 1.0)))
        }
    }

    #[test]
    fn divergence_guard_trips() {
        let fid = denoising_fid(vec![0.0]);
        let config = SolveConfig { schedule: Schedule::uniform(50), averaging: 1, ..SolveConfig::default() };
        let err = pnp_flow_solve(&config, &fid, &Blowup, &LatentSpec::gaussian(1)).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err:?}");
    }

    #[test]
    fn config_validation() {
        let fid = denoising_fid(vec![0.0]);
        let field = ZeroField::new(1);
        let latent = LatentSpec::gaussian(1);
        let bad_k = SolveConfig { averaging: 0, ..SolveConfig::default() };
        assert!(pnp_flow_solve(&bad_k, &fid, &field, &latent).is_err());
        let bad_alpha = SolveConfig { step_size: StepSize::Power { alpha: 2.0 }, ..SolveConfig::default() };
        assert!(pnp_flow_solve(&bad_alpha, &fid, &field, &latent).is_err());
        let wrong_dim = ZeroField::new(3);
        assert!(pnp_flow_solve(&SolveConfig::default(), &fid, &wrong_dim, &latent).is_err());
    }
}
