use super::pnp::SolveTrace;
use crate::error::{Error, Result};

/// Empirical check of the summable-step bound `||x_{n+1} - x_n|| <= M (1 - t_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// `sum_n ||x_{n+1} - x_n||`
    pub total_variation: f64,
    /// `sum_n (1 - t_n)`
    pub gap_sum: f64,
    /// `||x_{n+1} - x_n|| / (1 - t_n)`; zero over zero counts as zero.
    pub ratios: Vec<f64>,
    /// Smallest `M` satisfying the bound on this trace.
    pub bound: f64,
    pub bounded: bool,
}

impl ConvergenceReport {
    /// `sum_{n >= from} ||x_{n+1} - x_n||`
    pub fn tail_sum(&self, trace: &SolveTrace, from: usize) -> f64 {
        trace.steps.iter().filter(|s| s.n >= from).map(|s| s.step_norm).sum()
    }
}

pub fn convergence_report(trace: &SolveTrace) -> Result<ConvergenceReport> {
    if trace.is_empty() {
        return Err(Error::Invalid("convergence report needs a non-empty trace".into()));
    }
    let ratios: Vec<f64> = trace
        .steps
        .iter()
        .map(|s| {
            let gap = 1.0 - s.t;
            if s.step_norm == 0.0 {
                0.0
            } else if gap <= 0.0 {
                f64::INFINITY
            } else {
                s.step_norm / gap
            }
        })
        .collect();
    let bound = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ConvergenceReport {
        total_variation: trace.total_variation(),
        gap_sum: trace.steps.iter().map(|s| 1.0 - s.t).sum(),
        ratios,
        bound,
        bounded: bound.is_finite(),
    })
}
