mod common;

use std::f64::consts::PI;

use common::{cfm_floor_gaussian, gauss_hermite, gauss_legendre_unit, posterior_mean_oracle};
use pnp_flow::dist::Component;
use pnp_flow::flows::{denoise, GaussIndepField, GmmIndepField};
use pnp_flow::Grid;

#[test]
fn hermite_rule_integrates_moments() {
    let (x, w) = gauss_hermite(256);
    let moment = |k: i32| x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum::<f64>();
    assert!((moment(0) - PI.sqrt()).abs() < 1e-13);
    assert!(moment(1).abs() < 1e-13);
    assert!((moment(2) - PI.sqrt() / 2.0).abs() < 1e-13);
    assert!((moment(4) - 3.0 * PI.sqrt() / 4.0).abs() < 1e-12);
}

#[test]
fn legendre_rule_integrates_polynomials() {
    let (x, w) = gauss_legendre_unit(32);
    let integral = |k: i32| x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum::<f64>();
    for k in 0..20 {
        assert!((integral(k) - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "{k}");
    }
}

#[test]
fn cfm_floor_matches_closed_form() {
    // For s = 1/2 the per-coordinate integral is pi/4.
    let floor = cfm_floor_gaussian(0.5, 2, 200);
    assert!((floor - PI / 2.0).abs() < 1e-10, "{floor}");
}

fn probe_grid() -> Vec<(f64, f64)> {
    let ts: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let xs: Vec<f64> = (0..21).map(|j| -5.0 + 0.5 * j as f64).collect();
    ts.iter().flat_map(|&t| xs.iter().map(move |&x| (t, x))).collect()
}

#[test]
fn mixture_denoiser_matches_quadrature() {
    let mix = [(0.3, -2.0, 0.5), (0.5, 1.0, 0.3), (0.2, 3.0, 0.8)];
    let field =
        GmmIndepField::new(mix.iter().map(|&(weight, m, scale)| Component { weight, mean: vec![m], scale }).collect())
            .unwrap();
    let nodes = gauss_hermite(256);
    let mut worst: f64 = 0.0;
    for (t, x) in probe_grid() {
        let d = denoise(&field, t, &Grid::vector(vec![x]).unwrap()).unwrap().data()[0];
        worst = worst.max((d - posterior_mean_oracle(&mix, t, x, &nodes)).abs());
    }
    assert!(worst < 1e-6, "worst gap {worst:e}");
}

#[test]
fn gaussian_denoiser_matches_quadrature() {
    let field = GaussIndepField::new(vec![7.0], 0.5).unwrap();
    let nodes = gauss_hermite(256);
    for (t, x) in probe_grid() {
        let x = x + 7.0 * t;
        let d = denoise(&field, t, &Grid::vector(vec![x]).unwrap()).unwrap().data()[0];
        let oracle = posterior_mean_oracle(&[(1.0, 7.0, 0.5)], t, x, &nodes);
        assert!((d - oracle).abs() < 1e-6, "t={t} x={x}: {d} vs {oracle}");
    }
}

#[test]
fn oracle_endpoints() {
    let mix = [(0.4, -1.0, 0.5), (0.6, 2.0, 0.5)];
    let nodes = gauss_hermite(64);
    assert!((posterior_mean_oracle(&mix, 0.0, 3.0, &nodes) - 0.8).abs() < 1e-15);
    assert_eq!(posterior_mean_oracle(&mix, 1.0, 3.0, &nodes), 3.0);
}
