//! Exhaustive search over the step-size exponent and the number of steps.

use std::path::Path;

use crate::bench::config::{ExperimentConfig, ScheduleKind};
use crate::bench::data::{build_field, load_dataset};
use crate::bench::experiment::evaluate;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHAS: [f64; 6] = [0.01, 0.1, 0.3, 0.5, 0.8, 1.0];
pub const DEFAULT_STEPS: [usize; 3] = [100, 200, 500];

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub alpha: f64,
    pub steps: usize,
    /// Mean PSNR over the validation items; `-inf` when any item failed.
    pub score: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct GridSearchResult {
    pub best: ExperimentConfig,
    pub best_score: f64,
    /// One row per `(alpha, steps)` pair, alpha-major.
    pub table: Vec<ScoreRow>,
}

/// Evaluates every `(alpha, steps)` cell on the validation items and keeps
/// the best mean PSNR; ties go to fewer steps, then to the smaller alpha.
pub fn grid_search(base: &ExperimentConfig, alphas: &[f64], steps: &[usize]) -> Result<GridSearchResult> {
    if alphas.is_empty() || steps.is_empty() {
        return Err(Error::Config("grid search needs non-empty alpha and step grids".into()));
    }
    base.validate()?;
    let dataset = load_dataset(base)?;
    if dataset.validation.is_empty() {
        return Err(Error::Config("grid search needs validation items".into()));
    }
    let field = build_field(base, &dataset)?;
    let mut table = Vec::with_capacity(alphas.len() * steps.len());
    for &alpha in alphas {
        for &n in steps {
            let cell = with_cell(base, alpha, n);
            let row = match cell.validate() {
                Err(e) => ScoreRow { alpha, steps: n, score: f64::NEG_INFINITY, error: Some(e.to_string()) },
                Ok(()) => {
                    let outcomes = evaluate(&cell, &dataset, field.as_ref(), &dataset.validation);
                    match outcomes.iter().find_map(|o| o.record.error.clone()) {
                        Some(e) => ScoreRow { alpha, steps: n, score: f64::NEG_INFINITY, error: Some(e) },
                        None => {
                            let total: f64 = outcomes.iter().filter_map(|o| o.record.psnr).sum();
                            let score = total / outcomes.len() as f64;
                            let score = if score.is_nan() { f64::NEG_INFINITY } else { score };
                            ScoreRow { alpha, steps: n, score, error: None }
                        }
                    }
                }
            };
            table.push(row);
        }
    }
    let best_row = table
        .iter()
        .reduce(|best, row| {
            let better = row.score > best.score
                || (row.score == best.score && (row.steps, row.alpha) < (best.steps, best.alpha));
            if better {
                row
            } else {
                best
            }
        })
        .expect("non-empty table");
    Ok(GridSearchResult { best: with_cell(base, best_row.alpha, best_row.steps), best_score: best_row.score, table })
}

fn with_cell(base: &ExperimentConfig, alpha: f64, steps: usize) -> ExperimentConfig {
    let mut c = base.clone();
    c.solver.alpha = alpha;
    c.solver.gamma = None;
    match c.solver.schedule {
        ScheduleKind::Uniform => c.solver.steps = steps,
        ScheduleKind::Geometric => c.solver.n_max = steps,
    }
    c
}

/// Columns `alpha,steps,score,error`.
pub fn write_score_table(path: &Path, table: &[ScoreRow]) -> Result<()> {
    let mut out = csv::Writer::from_path(path).map_err(|e| Error::Invalid(e.to_string()))?;
    let wrap = |e: csv::Error| Error::Invalid(e.to_string());
    out.write_record(["alpha", "steps", "score", "error"]).map_err(wrap)?;
    for r in table {
        out.write_record([
            format!("{:e}", r.alpha),
            r.steps.to_string(),
            format!("{:e}", r.score),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(wrap)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
