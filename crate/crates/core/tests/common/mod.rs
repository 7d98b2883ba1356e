//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's closed-form fields.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Orthonormal Hermite recurrence: returns `(p_n(z), p_{n-1}(z))` scaled
/// so that the weight is `2 / (2n p_{n-1}^2)`.
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    let (mut p1, mut p2) = (PI.powf(-0.25), 0.0);
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Nodes and weights for `int e^{-u^2} f(u) du` (physicists' Hermite).
///
/// Positive roots are bracketed by sign changes on a fine grid, then
/// polished with Newton steps.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n.is_multiple_of(2), "even order only");
    let nf = n as f64;
    let upper = (2.0 * nf + 1.0).sqrt() + 1.0;
    let steps = (upper / 1e-3) as usize;
    let mut roots = Vec::with_capacity(n / 2);
    let mut prev = (1e-4, hermite_pair(n, 1e-4).0);
    for k in 1..=steps {
        let z = 1e-4 + k as f64 * 1e-3;
        let p = hermite_pair(n, z).0;
        if p.signum() != prev.1.signum() {
            let (mut lo, mut hi) = (prev.0, z);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if hermite_pair(n, mid).0.signum() == hermite_pair(n, lo).0.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut r = 0.5 * (lo + hi);
            for _ in 0..3 {
                let (p1, p2) = hermite_pair(n, r);
                let next = r - p1 / ((2.0 * nf).sqrt() * p2);
                if next > lo && next < hi {
                    r = next;
                }
            }
            roots.push(r);
        }
        prev = (z, p);
    }
    assert_eq!(roots.len(), n / 2, "missed Hermite roots");
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for &r in roots.iter().rev() {
        let pp = (2.0 * nf).sqrt() * hermite_pair(n, r).1;
        x.push(-r);
        w.push(2.0 / (pp * pp));
    }
    for &r in &roots {
        let pp = (2.0 * nf).sqrt() * hermite_pair(n, r).1;
        x.push(r);
        w.push(2.0 / (pp * pp));
    }
    (x, w)
}

/// Nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let r = (x - mean) / sd;
    -0.5 * r * r - sd.ln() - 0.5 * (2.0 * PI).ln()
}

/// `E[X1 | (1 - t) X0 + t X1 = x]` for `X0 ~ N(0, 1)` independent of a 1-D
/// mixture `X1 ~ sum_k w_k N(mu_k, s_k^2)`, by Gauss-Hermite quadrature.
///
/// Each component is integrated in whichever variable makes the other
/// factor the wider one: the latent `x0` when `t s_k >= 1 - t`, the target
/// `x1` otherwise. All terms are accumulated relative to their maximum log.
pub fn posterior_mean_oracle(components: &[(f64, f64, f64)], t: f64, x: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    if t == 0.0 {
        return components.iter().map(|(w, m, _)| w * m).sum();
    }
    if t == 1.0 {
        return x;
    }
    let (u, wq) = nodes;
    let mut terms: Vec<(f64, f64)> = Vec::with_capacity(u.len() * components.len());
    for &(weight, mu, s) in components {
        for (&ui, &wi) in u.iter().zip(wq) {
            if wi == 0.0 {
                continue;
            }
            let base = wi.ln() - 0.5 * PI.ln() + weight.ln();
            if t * s >= 1.0 - t {
                let x0 = std::f64::consts::SQRT_2 * ui;
                let x1 = (x - (1.0 - t) * x0) / t;
                terms.push((base + log_normal_pdf(x1, mu, s) - t.ln(), x1));
            } else {
                let x1 = mu + std::f64::consts::SQRT_2 * s * ui;
                terms.push((base + log_normal_pdf(x - t * x1, 0.0, 1.0 - t), x1));
            }
        }
    }
    let max = terms.iter().map(|(l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (l, x1) in terms {
        let e = (l - max).exp();
        num += e * x1;
        den += e;
    }
    num / den
}

/// Minimum of the CFM objective for `X0 ~ N(0, I_d)`, `X1 ~ N(m, s^2 I_d)`
/// independent: `d * int_0^1 Var(X1 - X0 | X_t) dt` per coordinate, by
/// Gaussian conditioning and Gauss-Legendre quadrature in `t`.
pub fn cfm_floor_gaussian(scale: f64, dim: usize, nodes: usize) -> f64 {
    let (ts, ws) = gauss_legendre_unit(nodes);
    let s2 = scale * scale;
    let integral: f64 = ts
        .iter()
        .zip(&ws)
        .map(|(&t, &w)| {
            let var_u = 1.0 + s2;
            let cov = t * s2 - (1.0 - t);
            let var_x = (1.0 - t) * (1.0 - t) + t * t * s2;
            w * (var_u - cov * cov / var_x)
        })
        .sum();
    dim as f64 * integral
}

/// Minimum total assignment cost over all permutations, in index order.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn recurse(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, perm: &mut Vec<usize>, best: &mut f64) {
        let n = cost.len();
        if row == n {
            let total = perm.iter().enumerate().fold(0.0, |acc, (i, &j)| acc + cost[i][j]);
            if total < *best {
                *best = total;
            }
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                perm.push(j);
                recurse(cost, row + 1, used, perm, best);
                perm.pop();
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    recurse(cost, 0, &mut vec![false; cost.len()], &mut Vec::new(), &mut best);
    best
}
