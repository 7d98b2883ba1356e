//! Fast self-checks of the numerical contracts, run by `pnpflow check`.

use crate::dist::{LatentSpec, TargetSpec};
use crate::error::Result;
use crate::flows::{denoising_loss_mc, euler_sample, Coupling, GaussIndepField, GaussOtField};
use crate::grid::Grid;
use crate::inverse::{gaussian_kernel, op_adjoint, op_apply, DegradationOp, Fidelity, FidelityKind};
use crate::rng::RngState;
use crate::solver::{convergence_report, pnp_flow_solve, Init, Schedule, SolveConfig, StepSize};
use crate::training::{mlp_param_grads, MlpParams, MlpSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn random_grid(shape: &[usize], rng: &mut RngState) -> Grid {
    let n = shape.iter().product();
    Grid::from_parts((0..n).map(|_| rng.normal()).collect(), shape.to_vec())
}

/// `|<Hx, u> - <x, H^T u>| / (|x| |u|)` over random pairs, worst case.
pub fn adjoint_check(seed: u64) -> Result<CheckResult> {
    let shape = [3, 16, 16];
    let ops = vec![
        DegradationOp::Identity,
        DegradationOp::mask_random(0.5, seed, 16, 16)?,
        DegradationOp::mask_box_centered(8, 16, 16)?,
        DegradationOp::conv_blur(gaussian_kernel(5, 1.0)?)?,
        DegradationOp::downsample(2)?,
        DegradationOp::downsample(4)?,
    ];
    let mut rng = RngState::new(seed);
    let mut worst: f64 = 0.0;
    for op in &ops {
        for _ in 0..20 {
            let x = random_grid(&shape, &mut rng);
            let u = random_grid(&op.output_shape(&shape)?, &mut rng);
            let lhs = op_apply(op, &x)?.dot(&u)?;
            let rhs = x.dot(&op_adjoint(op, &u)?)?;
            worst = worst.max((lhs - rhs).abs() / (x.norm() * u.norm()));
        }
    }
    Ok(result("adjoint", worst < 1e-10, format!("worst relative gap {worst:.2e}")))
}

/// Data-term and network gradients against central differences.
pub fn gradient_check(seed: u64) -> Result<CheckResult> {
    let mut rng = RngState::new(seed);
    let op = DegradationOp::conv_blur(gaussian_kernel(3, 0.8)?)?;
    let y = random_grid(&[6, 6], &mut rng);
    let fid = Fidelity::new(FidelityKind::GaussianL2, op, y)?;
    let x = random_grid(&[6, 6], &mut rng);
    let g = fid.gradient(&x)?;
    let h = 1e-6;
    let mut worst_fid: f64 = 0.0;
    for i in 0..x.len() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data_mut()[i] += h;
        xm.data_mut()[i] -= h;
        let fd = (fid.value(&xp)? - fid.value(&xm)?) / (2.0 * h);
        worst_fid = worst_fid.max((fd - g.data()[i]).abs());
    }

    let spec = MlpSpec::new(2, vec![8])?;
    let params = MlpParams::init(&spec, &mut rng)?;
    let ts: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
    let xs: Vec<Grid> = (0..4).map(|_| random_grid(&[2], &mut rng)).collect();
    let targets: Vec<Grid> = (0..4).map(|_| random_grid(&[2], &mut rng)).collect();
    let (_, grads) = mlp_param_grads(&params, &ts, &xs, &targets)?;
    let mut worst_mlp: f64 = 0.0;
    for (i, &g) in grads.iter().enumerate() {
        let mut p = params.clone();
        p.as_mut_slice()[i] += h;
        let lp = mlp_param_grads(&p, &ts, &xs, &targets)?.0;
        p.as_mut_slice()[i] -= 2.0 * h;
        let lm = mlp_param_grads(&p, &ts, &xs, &targets)?.0;
        let fd = (lp - lm) / (2.0 * h);
        worst_mlp = worst_mlp.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-3));
    }
    Ok(result(
        "gradient",
        worst_fid < 1e-6 && worst_mlp < 1e-4,
        format!("data term abs {worst_fid:.2e}, network rel {worst_mlp:.2e}"),
    ))
}

/// Straight OT flow: zero denoising loss and exact Euler transport.
pub fn straight_flow_check(seed: u64) -> Result<CheckResult> {
    let field = GaussOtField::new(vec![7.0, 7.0], 0.5)?;
    let latent = LatentSpec::gaussian(2);
    let target = TargetSpec::gaussian(vec![7.0, 7.0], 0.5)?;
    let mut rng = RngState::new(seed);
    let mut worst_loss: f64 = 0.0;
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let loss = denoising_loss_mc(&field, &latent, &target, Coupling::GaussianOt, t, 2000, &mut rng)?;
        worst_loss = worst_loss.max(loss);
    }
    let mut worst_euler: f64 = 0.0;
    for n in [1, 7, 100] {
        for _ in 0..20 {
            let x0 = random_grid(&[2], &mut rng);
            let gap = euler_sample(&field, &x0, n)?.sub(&field.transport(&x0)?)?.norm_inf();
            worst_euler = worst_euler.max(gap);
        }
    }
    Ok(result(
        "straight-flow",
        worst_loss < 1e-10 && worst_euler < 1e-12,
        format!("max loss {worst_loss:.2e}, max Euler gap {worst_euler:.2e}"),
    ))
}

/// Geometric schedule with `gamma_n = 1 - t_n`: summable steps, finite bound.
pub fn convergence_check(seed: u64) -> Result<CheckResult> {
    let field = GaussIndepField::new(vec![7.0, 7.0], 0.5)?;
    let mut rng = RngState::new(seed);
    let clean = Grid::vector(vec![7.0 + 0.5 * rng.normal(), 7.0 + 0.5 * rng.normal()])?;
    let y = Grid::vector(clean.data().iter().map(|v| v + 1.5 * rng.normal()).collect())?;
    let fid = Fidelity::new(FidelityKind::GaussianL2, DegradationOp::Identity, y)?;
    let config = SolveConfig {
        schedule: Schedule::geometric(0.9, 200),
        step_size: StepSize::Power { alpha: 1.0 },
        averaging: 5,
        seed,
        init: Init::Backprojection,
        clip_noise: None,
    };
    let (_, trace) = pnp_flow_solve(&config, &fid, &field, &LatentSpec::gaussian(2))?;
    let report = convergence_report(&trace)?;
    let tail = report.tail_sum(&trace, 150);
    Ok(result(
        "convergence",
        report.bounded && tail < 1e-4,
        format!("total {:.3e}, tail {tail:.2e}, M {:.3e}", report.total_variation, report.bound),
    ))
}

pub fn run_checks(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![adjoint_check(seed)?, gradient_check(seed)?, straight_flow_check(seed)?, convergence_check(seed)?])
}
