//! Running a configured experiment: degrade, restore and score every item.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bench::config::{ExperimentConfig, Task};
use crate::bench::csv_io::{write_kernel_csv, write_points_csv, write_trace_csv};
use crate::bench::data::{build_field, build_operator, latent_for, load_dataset, Dataset, STREAM_ITEMS};
use crate::bench::netpbm::write_netpbm;
use crate::dist::LatentSpec;
use crate::error::{Error, Result};
use crate::flows::VelocityField;
use crate::grid::Grid;
use crate::inverse::{degrade, Fidelity};
use crate::metrics::{mse, psnr_from_mse, ssim, DEFAULT_PEAK, SSIM_WINDOW};
use crate::rng::RngState;
use crate::solver::{blind_deblur_solve, pnp_flow_solve_with, SolveTrace};

/// Per-item scores. Degraded scores compare the observation with the clean
/// item and are only present when both have the same shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub index: usize,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub mse: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub degraded_mse: Option<f64>,
    pub degraded_psnr: Option<f64>,
}

/// Means over the successful items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_ok: usize,
    pub n_failed: usize,
    pub mse: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub degraded_mse: Option<f64>,
    pub degraded_psnr: Option<f64>,
}

impl Aggregate {
    pub fn from_records(records: &[ItemRecord]) -> Self {
        let ok: Vec<&ItemRecord> = records.iter().filter(|r| r.ok).collect();
        let mean = |f: &dyn Fn(&ItemRecord) -> Option<f64>| -> Option<f64> {
            let vals: Option<Vec<f64>> = ok.iter().map(|r| f(r)).collect();
            vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
        };
        Aggregate {
            n_ok: ok.len(),
            n_failed: records.len() - ok.len(),
            mse: mean(&|r| r.mse),
            psnr: mean(&|r| r.psnr),
            ssim: mean(&|r| r.ssim),
            degraded_mse: mean(&|r| r.degraded_mse),
            degraded_psnr: mean(&|r| r.degraded_psnr),
        }
    }
}

/// Reproducible record of a run. Timing and memory live in a separate
/// `resources.json` so that this file depends only on config and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub task: Task,
    pub config: String,
    pub items: Vec<ItemRecord>,
    pub aggregate: Aggregate,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub wall_clock_seconds: f64,
    /// Peak resident set size of the process, when the OS reports it.
    pub peak_rss_kib: Option<u64>,
}

/// Peak resident set size from `/proc/self/status`.
pub fn peak_rss_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

#[derive(Clone, Debug)]
pub struct ItemOutcome {
    pub record: ItemRecord,
    pub observation: Option<Grid>,
    pub restored: Option<Grid>,
    pub trace: Option<SolveTrace>,
    pub kernel: Option<Grid>,
}

/// Field, latent and config shared by all items of a run.
pub struct Restorer<'a> {
    pub config: &'a ExperimentConfig,
    pub field: &'a dyn VelocityField,
    pub latent: LatentSpec,
}

impl Restorer<'_> {
    /// Degrades and restores one item using the item's own RNG streams.
    pub fn run_item(&self, index: usize, clean: &Grid) -> ItemOutcome {
        let mut observation = None;
        let result = self.restore(index, clean, &mut observation);
        match result {
            Ok((restored, trace, kernel)) => {
                let record = score(index, clean, observation.as_ref(), &restored);
                ItemOutcome { record, observation, restored: Some(restored), trace, kernel }
            }
            Err(e) => ItemOutcome {
                record: ItemRecord {
                    index,
                    ok: false,
                    error: Some(e.to_string()),
                    mse: None,
                    psnr: None,
                    ssim: None,
                    degraded_mse: None,
                    degraded_psnr: None,
                },
                observation,
                restored: None,
                trace: None,
                kernel: None,
            },
        }
    }

    fn restore(
        &self,
        index: usize,
        clean: &Grid,
        observation: &mut Option<Grid>,
    ) -> Result<(Grid, Option<SolveTrace>, Option<Grid>)> {
        let config = self.config;
        let item = RngState::new(config.experiment.seed).fork(STREAM_ITEMS).fork(index as u64);
        let op = build_operator(config, clean.shape(), item.fork(0).next_u64())?;
        let y = degrade(clean, &op, &config.operator.noise_model(), &mut item.fork(1))?;
        *observation = Some(y.clone());
        let solve_seed = item.fork(2).next_u64();
        if config.experiment.task == Task::BlindDeblur {
            let blind = config.solver.blind_config(solve_seed, config.operator.kernel_size);
            let out = blind_deblur_solve(&y, self.field, &self.latent, &blind)?;
            return Ok((out.image, Some(out.trace), Some(out.kernel)));
        }
        let fid = Fidelity::new(config.operator.fidelity_kind(), op, y)?;
        let solve = config.solver.solve_config(solve_seed);
        let (x, trace) = pnp_flow_solve_with(&solve, &fid, self.field, &self.latent, Some(clean), |_, _| Ok(()))?;
        Ok((x, Some(trace), None))
    }

    /// Runs `items` in parallel; results come back in item order.
    pub fn run_items(&self, items: &[Grid]) -> Vec<ItemOutcome> {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
        let chunk = items.len().div_ceil(workers).max(1);
        std::thread::scope(|scope| {
            let handles: Vec<_> = items
                .chunks(chunk)
                .enumerate()
                .map(|(c, part)| {
                    scope.spawn(move || {
                        part.iter()
                            .enumerate()
                            .map(|(i, clean)| self.run_item(c * chunk + i, clean))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
        })
    }
}

fn score(index: usize, clean: &Grid, observation: Option<&Grid>, restored: &Grid) -> ItemRecord {
    let m = mse(restored, clean).ok();
    let image_ssim = match clean.image_dims() {
        Ok((_, h, w)) if clean.shape().len() > 1 && h >= SSIM_WINDOW && w >= SSIM_WINDOW => {
            ssim(restored, clean, DEFAULT_PEAK).ok()
        }
        _ => None,
    };
    let degraded_mse = observation.and_then(|y| mse(y, clean).ok());
    ItemRecord {
        index,
        ok: true,
        error: None,
        mse: m,
        psnr: m.map(|m| psnr_from_mse(m, DEFAULT_PEAK)),
        ssim: image_ssim,
        degraded_mse,
        degraded_psnr: degraded_mse.map(|m| psnr_from_mse(m, DEFAULT_PEAK)),
    }
}

/// Scores `items` without writing anything.
pub fn evaluate(
    config: &ExperimentConfig,
    dataset: &Dataset,
    field: &dyn VelocityField,
    items: &[Grid],
) -> Vec<ItemOutcome> {
    let restorer = Restorer { config, field, latent: latent_for(config, dataset) };
    restorer.run_items(items)
}

fn write_metrics_csv(path: &Path, records: &[ItemRecord]) -> Result<()> {
    let mut out = csv::Writer::from_path(path).map_err(|e| Error::Invalid(e.to_string()))?;
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
    out.write_record(["index", "ok", "mse", "psnr", "ssim", "degraded_mse", "degraded_psnr", "error"])
        .map_err(|e| Error::Invalid(e.to_string()))?;
    for r in records {
        out.write_record([
            r.index.to_string(),
            r.ok.to_string(),
            fmt(r.mse),
            fmt(r.psnr),
            fmt(r.ssim),
            fmt(r.degraded_mse),
            fmt(r.degraded_psnr),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn image_name(prefix: &str, index: usize, g: &Grid) -> String {
    let ext = if g.shape().len() == 3 && g.shape()[0] == 3 { "ppm" } else { "pgm" };
    format!("{prefix}_{index:04}.{ext}")
}

fn clamp_unit(g: &Grid) -> Grid {
    g.map(|v| v.clamp(-1.0, 1.0))
}

/// Full run: writes restored items, `metrics.csv`, `manifest.json` and
/// `resources.json` into `experiment.out` (or `out` when given).
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<Manifest> {
    let started = Instant::now();
    config.validate()?;
    let out: PathBuf = out
        .map(Path::to_path_buf)
        .or_else(|| config.experiment.out.clone())
        .ok_or_else(|| Error::Config("no output directory (experiment.out or --out)".into()))?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let dataset = load_dataset(config)?;
    let field = build_field(config, &dataset)?;
    let outcomes = evaluate(config, &dataset, field.as_ref(), &dataset.test);

    let mut artifacts = Vec::new();
    let mut write = |name: String, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        f(&out.join(&name))?;
        artifacts.push(name);
        Ok(())
    };
    if dataset.is_points() {
        let restored: Vec<Grid> = outcomes.iter().filter_map(|o| o.restored.clone()).collect();
        let observed: Vec<Grid> = outcomes.iter().filter_map(|o| o.observation.clone()).collect();
        write("clean.csv".into(), &|p| write_points_csv(p, &dataset.test, true))?;
        write("observed.csv".into(), &|p| write_points_csv(p, &observed, true))?;
        write("restored.csv".into(), &|p| write_points_csv(p, &restored, true))?;
    } else {
        for o in &outcomes {
            let i = o.record.index;
            if let Some(x) = &o.restored {
                write(image_name("restored", i, x), &|p| write_netpbm(p, &clamp_unit(x)))?;
            }
            if let Some(y) = &o.observation {
                write(image_name("observed", i, y), &|p| write_netpbm(p, &clamp_unit(y)))?;
            }
            if let Some(k) = &o.kernel {
                write(format!("kernel_{i:04}.csv"), &|p| write_kernel_csv(p, k))?;
            }
        }
    }
    if let Some(trace) = outcomes.first().and_then(|o| o.trace.as_ref()) {
        write("trace_0000.csv".into(), &|p| write_trace_csv(p, trace))?;
    }
    let records: Vec<ItemRecord> = outcomes.into_iter().map(|o| o.record).collect();
    write("metrics.csv".into(), &|p| write_metrics_csv(p, &records))?;

    let manifest = Manifest {
        config_hash: config.hash()?,
        seed: config.experiment.seed,
        task: config.experiment.task,
        config: config.resolved()?,
        aggregate: Aggregate::from_records(&records),
        items: records,
        artifacts,
    };
    let path = out.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Invalid(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    let resources = Resources { wall_clock_seconds: started.elapsed().as_secs_f64(), peak_rss_kib: peak_rss_kib() };
    let path = out.join("resources.json");
    let json = serde_json::to_string_pretty(&resources).map_err(|e| Error::Invalid(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::DataKind;

    fn small_denoise() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(Task::Denoise);
        c.experiment.items = 40;
        c.operator.sigma = 1.5;
        c.solver.steps = 30;
        c
    }

    #[test]
    fn aggregate_skips_failures() {
        let ok = ItemRecord {
            index: 0,
            ok: true,
            error: None,
            mse: Some(1.0),
            psnr: Some(6.0),
            ssim: None,
            degraded_mse: Some(3.0),
            degraded_psnr: Some(1.0),
        };
        let bad = ItemRecord {
            index: 1,
            ok: false,
            error: Some("x".into()),
            mse: None,
            psnr: None,
            ssim: None,
            degraded_mse: None,
            degraded_psnr: None,
        };
        let agg = Aggregate::from_records(&[ok, bad]);
        assert_eq!((agg.n_ok, agg.n_failed), (1, 1));
        assert_eq!(agg.mse, Some(1.0));
        assert_eq!(agg.ssim, None);
    }

    #[test]
    fn denoising_points_beats_observation() {
        let dir = tempfile::tempdir().unwrap();
        let m = run_experiment(&small_denoise(), Some(dir.path())).unwrap();
        assert_eq!(m.aggregate.n_ok, 40);
        assert!(m.aggregate.mse.unwrap() < m.aggregate.degraded_mse.unwrap());
        for name in ["manifest.json", "resources.json", "metrics.csv", "restored.csv", "trace_0000.csv"] {
            assert!(dir.path().join(name).is_file(), "{name}");
        }
    }

    #[test]
    fn manifest_is_reproducible() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_experiment(&small_denoise(), Some(a.path())).unwrap();
        run_experiment(&small_denoise(), Some(b.path())).unwrap();
        let read = |d: &Path| fs::read(d.join("manifest.json")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn image_tasks_write_netpbm() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::new(Task::InpaintBox);
        c.data.kind = DataKind::Shapes;
        c.data.train_items = 8;
        c.data.scale = 0.1;
        c.experiment.items = 2;
        c.operator.sigma = 0.05;
        c.solver.steps = 10;
        c.solver.averaging = 1;
        let m = run_experiment(&c, Some(dir.path())).unwrap();
        assert_eq!(m.aggregate.n_ok, 2);
        assert!(m.aggregate.ssim.is_some());
        assert!(dir.path().join("restored_0001.pgm").is_file());
    }

    #[test]
    fn item_failures_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_denoise();
        c.experiment.items = 3;
        c.solver.gamma = Some(1e9);
        c.operator.sigma = 1.0;
        let m = run_experiment(&c, Some(dir.path())).unwrap();
        assert_eq!(m.aggregate.n_failed, 3);
        assert!(m.items[0].error.as_ref().unwrap().contains("diverged"), "{:?}", m.items[0].error);
    }
}
