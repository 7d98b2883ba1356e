mod common;

use common::brute_force_assignment;
use pnp_flow::bench::{grid_search, ExperimentConfig};
use pnp_flow::dist::{sample_latent, sample_target, Component, LatentSpec, TargetSpec};
use pnp_flow::flows::{
    denoise, denoising_loss_mc, Coupling, GaussIndepField, GaussOtField, GmmIndepField, VelocityField,
};
use pnp_flow::inverse::{gaussian_kernel, op_adjoint, op_apply, DegradationOp, Fidelity, FidelityKind};
use pnp_flow::metrics::{mse, psnr, ssim, DEFAULT_PEAK};
use pnp_flow::solver::pnp_flow_step;
use pnp_flow::training::{hungarian, squared_distance_matrix, MlpField, MlpParams, MlpSpec};
use pnp_flow::{interp_et, Grid, RngState};
use proptest::prelude::*;

fn random_grid(shape: &[usize], rng: &mut RngState) -> Grid {
    let n = shape.iter().product();
    Grid::new((0..n).map(|_| rng.normal()).collect(), shape.to_vec()).unwrap()
}

fn bits(g: &Grid) -> Vec<u64> {
    g.data().iter().map(|v| v.to_bits()).collect()
}

fn mixture(seed: u64, dim: usize) -> GmmIndepField {
    let mut rng = RngState::new(seed);
    let comps = (0..3)
        .map(|_| Component {
            weight: 0.2 + rng.uniform(),
            mean: (0..dim).map(|_| 3.0 * rng.normal()).collect(),
            scale: 0.2 + rng.uniform(),
        })
        .collect::<Vec<_>>();
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    GmmIndepField::new(comps.into_iter().map(|c| Component { weight: c.weight / total, ..c }).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolation_is_affine_in_t(seed in any::<u64>(), t in 0.0f64..=1.0, s in 0.0f64..=1.0) {
        let mut rng = RngState::new(seed);
        let a = random_grid(&[5], &mut rng);
        let b = random_grid(&[5], &mut rng);
        let et = interp_et(&a, &b, t).unwrap();
        let es = interp_et(&a, &b, s).unwrap();
        let expected = es.add(&b.sub(&a).unwrap().scale(t - s)).unwrap();
        for (x, y) in et.data().iter().zip(expected.data()) {
            prop_assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
        prop_assert_eq!(bits(&interp_et(&a, &b, 0.0).unwrap()), bits(&a));
        prop_assert_eq!(bits(&interp_et(&a, &b, 1.0).unwrap()), bits(&b));
    }

    #[test]
    fn sampling_replays_from_seed(seed in any::<u64>(), n in 1usize..20) {
        let latent = LatentSpec::gaussian(3);
        let target = TargetSpec::gaussian(vec![1.0, -2.0, 0.5], 0.7).unwrap();
        let a = sample_latent(&latent, n, &mut RngState::new(seed)).unwrap();
        let b = sample_latent(&latent, n, &mut RngState::new(seed)).unwrap();
        prop_assert_eq!(a, b);
        let a = sample_target(&target, n, &mut RngState::new(seed)).unwrap();
        let b = sample_target(&target, n, &mut RngState::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn denoiser_is_its_definition(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let field = mixture(seed, 4);
        let x = random_grid(&[4], &mut RngState::new(seed ^ 1));
        let d = denoise(&field, t, &x).unwrap();
        let v = field.eval(t, &x).unwrap();
        let expected: Vec<u64> = x.data().iter().zip(v.data()).map(|(a, b)| (a + (1.0 - t) * b).to_bits()).collect();
        prop_assert_eq!(bits(&d), expected);
    }

    #[test]
    fn adjoint_dot_test(seed in any::<u64>(), h in 4usize..20, w in 4usize..20, c in 1usize..4) {
        let shape = [c, 2 * h, 2 * w];
        let mut ops = vec![
            DegradationOp::mask_random(0.5, seed, 2 * h, 2 * w).unwrap(),
            DegradationOp::mask_box_centered(h.min(w), 2 * h, 2 * w).unwrap(),
            DegradationOp::conv_blur(gaussian_kernel(5, 1.2).unwrap()).unwrap(),
            DegradationOp::downsample(2).unwrap(),
        ];
        if h % 2 == 0 && w % 2 == 0 {
            ops.push(DegradationOp::downsample(4).unwrap());
        }
        let mut rng = RngState::new(seed);
        for op in &ops {
            let x = random_grid(&shape, &mut rng);
            let u = random_grid(&op.output_shape(&shape).unwrap(), &mut rng);
            let lhs = op_apply(op, &x).unwrap().dot(&u).unwrap();
            let rhs = x.dot(&op_adjoint(op, &u).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10 * x.norm() * u.norm());
        }
    }

    #[test]
    fn blur_commutes_with_circular_shift(seed in any::<u64>(), dy in 0usize..12, dx in 0usize..12) {
        let (h, w) = (12, 12);
        let mut rng = RngState::new(seed);
        let sigma = 0.3 + rng.uniform();
        let op = DegradationOp::conv_blur(gaussian_kernel(3, sigma).unwrap()).unwrap();
        let x = random_grid(&[1, h, w], &mut rng);
        let shift = |g: &Grid| {
            let mut out = vec![0.0; h * w];
            for i in 0..h {
                for j in 0..w {
                    out[((i + dy) % h) * w + (j + dx) % w] = g.data()[i * w + j];
                }
            }
            Grid::new(out, vec![1, h, w]).unwrap()
        };
        let a = op_apply(&op, &shift(&x)).unwrap();
        let b = shift(&op_apply(&op, &x).unwrap());
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn downsample_adjoint_is_scaled_right_inverse(seed in any::<u64>(), k in prop::sample::select(vec![2usize, 4])) {
        let mut rng = RngState::new(seed);
        let n = 3 * 4 * 5;
        let u = Grid::new((0..n).map(|_| (rng.index(256) as f64 - 128.0) / 64.0).collect(), vec![3, 4, 5]).unwrap();
        let op = DegradationOp::downsample(k).unwrap();
        let back = op_apply(&op, &op_adjoint(&op, &u).unwrap()).unwrap();
        prop_assert_eq!(bits(&back), bits(&u.scale(1.0 / (k * k) as f64)));
    }

    #[test]
    fn hungarian_matches_brute_force(seed in any::<u64>(), b in 1usize..=6) {
        let mut rng = RngState::new(seed);
        let x0: Vec<Grid> = (0..b).map(|_| random_grid(&[3], &mut rng)).collect();
        let x1: Vec<Grid> = (0..b).map(|_| random_grid(&[3], &mut rng)).collect();
        let cost = squared_distance_matrix(&x0, &x1);
        prop_assert_eq!(hungarian(&cost).unwrap().cost(&cost), brute_force_assignment(&cost));
    }

    #[test]
    fn metrics_are_symmetric(seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let a = random_grid(&[1, 16, 16], &mut rng).map(|v| v.tanh());
        let b = random_grid(&[1, 16, 16], &mut rng).map(|v| v.tanh());
        prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        prop_assert_eq!(psnr(&a, &b, DEFAULT_PEAK).unwrap(), psnr(&b, &a, DEFAULT_PEAK).unwrap());
        prop_assert!((ssim(&a, &b, DEFAULT_PEAK).unwrap() - ssim(&b, &a, DEFAULT_PEAK).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn trained_fields_keep_the_contract(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let spec = MlpSpec::new(3, vec![16, 16]).unwrap();
        let field = MlpField::new(MlpParams::init(&spec, &mut RngState::new(seed)).unwrap());
        let x = random_grid(&[3], &mut RngState::new(seed ^ 7));
        let a = field.eval(t, &x).unwrap();
        let b = field.eval(t, &x).unwrap();
        prop_assert_eq!(a.shape(), x.shape());
        prop_assert!(a.is_finite());
        prop_assert_eq!(bits(&a), bits(&b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn independent_loss_is_bounded_below(seed in any::<u64>(), m in -5.0f64..5.0, s in 0.2f64..0.8) {
        let t = 0.5;
        let field = GaussIndepField::new(vec![m], s).unwrap();
        let target = TargetSpec::gaussian(vec![m], s).unwrap();
        let loss = denoising_loss_mc(
            &field, &LatentSpec::gaussian(1), &target, Coupling::Independent, t, 20_000, &mut RngState::new(seed),
        ).unwrap();
        let a2 = (1.0 - t) * (1.0 - t) + t * t * s * s;
        let var_diff = (1.0 + s * s) - (t * s * s - (1.0 - t)).powi(2) / a2;
        prop_assert!(loss > 0.5 * var_diff * (1.0 - t) * (1.0 - t), "{loss} vs {var_diff}");
    }

    #[test]
    fn ot_loss_vanishes(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let field = GaussOtField::new(vec![2.0, -1.0], 0.6).unwrap();
        let target = TargetSpec::gaussian(vec![2.0, -1.0], 0.6).unwrap();
        let loss = denoising_loss_mc(
            &field, &LatentSpec::gaussian(2), &target, Coupling::GaussianOt, t, 500, &mut RngState::new(seed),
        ).unwrap();
        prop_assert!(loss < 1e-10);
    }

    #[test]
    fn random_mask_keeps_its_rate(seed in any::<u64>(), rate in 0.1f64..0.9) {
        let op = DegradationOp::mask_random(rate, seed, 64, 64).unwrap();
        let again = DegradationOp::mask_random(rate, seed, 64, 64).unwrap();
        prop_assert_eq!(&op, &again);
        let ones = Grid::filled(&[1, 64, 64], 1.0);
        let kept = op_apply(&op, &ones).unwrap().sum() / 4096.0;
        prop_assert!((kept - (1.0 - rate)).abs() < 0.02, "kept {kept} at rate {rate}");
        prop_assert!((kept - (1.0 - rate)).abs() <= 0.5 / 4096.0 + 1e-12);
    }
}

#[test]
fn dirichlet_samples_sum_to_one() {
    let latent = LatentSpec::dirichlet(5);
    let samples = sample_latent(&latent, 10_000, &mut RngState::new(3)).unwrap();
    for s in &samples {
        assert!((s.sum() - 1.0).abs() < 1e-12);
        assert!(s.data().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn averaging_reduces_step_variance() {
    let field = mixture(11, 2);
    let y = Grid::vector(vec![0.4, -0.3]).unwrap();
    let fid = Fidelity::new(FidelityKind::GaussianL2, DegradationOp::Identity, y).unwrap();
    let x = Grid::vector(vec![0.5, 0.1]).unwrap();
    let latent = LatentSpec::gaussian(2);
    let spread = |k: usize| {
        let outs: Vec<Grid> = (0..50)
            .map(|seed| pnp_flow_step(&x, 0.4, 0.5, &fid, &field, &latent, k, &RngState::new(seed)).unwrap())
            .collect();
        let mean = outs.iter().fold(Grid::zeros(&[2]), |acc, g| acc.add(g).unwrap()).scale(1.0 / 50.0);
        outs.iter().map(|g| g.sub(&mean).unwrap().norm_sq()).sum::<f64>() / 49.0
    };
    let (one, many) = (spread(1), spread(25));
    assert!(many < one, "K=25 variance {many} vs K=1 {one}");
}

#[test]
fn grid_search_is_reproducible() {
    let text = "[experiment]\ntask = \"denoise\"\nseed = 4\nitems = 4\nvalidation_items = 4\n\n[data]\nkind = \"gaussian\"\nmean = [7.0, 7.0]\nscale = 0.5\n\n[operator]\nsigma = 1.5\n";
    let config = ExperimentConfig::from_toml(text).unwrap();
    let a = grid_search(&config, &[0.3, 0.8], &[10, 20]).unwrap();
    let b = grid_search(&config, &[0.3, 0.8], &[10, 20]).unwrap();
    assert_eq!(a.table, b.table);
    assert_eq!(a.best, b.best);
    assert_eq!(a.best_score.to_bits(), b.best_score.to_bits());
}
