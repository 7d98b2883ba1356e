//! `pnpflow`: train flow-matching priors and restore degraded data with them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pnp_flow::bench::checks::run_checks;
use pnp_flow::bench::csv_io::write_points_csv;
use pnp_flow::bench::netpbm::write_netpbm;
use pnp_flow::bench::{
    build_field, compare_paths, draw_samples, grid_search, load_dataset, run_experiment, train_model,
    write_score_table, ExperimentConfig, DEFAULT_ALPHAS, DEFAULT_STEPS,
};
use pnp_flow::training::{save_params, write_loss_csv};
use pnp_flow::{Error, Result};

#[derive(Parser)]
#[command(name = "pnpflow", version, about = "Plug-and-play flow matching for inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `experiment.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides any config key, e.g. `--set solver.alpha=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network velocity field on the configured data.
    Train(Common),
    /// Draw Euler samples from the configured model.
    Sample(Common),
    /// Degrade, restore and score the test items.
    Solve(Common),
    /// Score estimates against references (point CSVs, images or image directories).
    Eval {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Directory for `eval.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pick the step-size exponent and step count with the best validation PSNR.
    Gridsearch {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<usize>>,
    },
    /// Run the built-in numerical self-checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for `checks.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = Vec::new();
        for item in &self.set {
            let (k, v) =
                item.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {item:?}")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(seed) = self.seed {
            overrides.push(("experiment.seed".into(), seed.to_string()));
        }
        let mut config = ExperimentConfig::load_with_overrides(&self.config, &overrides)?;
        if let Some(out) = &self.out {
            config.experiment.out = Some(out.clone());
        }
        Ok(config)
    }
}

fn out_dir(config: &ExperimentConfig) -> Result<PathBuf> {
    let out = config
        .experiment
        .out
        .clone()
        .ok_or_else(|| Error::Config("no output directory (experiment.out or --out)".into()))?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

fn train(common: &Common) -> Result<()> {
    let config = common.load()?;
    let out = out_dir(&config)?;
    let dataset = load_dataset(&config)?;
    let outcome = train_model(&config, &dataset, |epoch, _| {
        if epoch % 5 == 0 {
            eprintln!("epoch {epoch}");
        }
    })?;
    save_params(&out.join("params.bin"), &outcome.params)?;
    write_loss_csv(&out.join("loss.csv"), &outcome.step_losses)?;
    write_loss_csv(&out.join("epoch_loss.csv"), &outcome.epoch_losses)?;
    println!("final epoch loss {:.6}", outcome.final_loss());
    Ok(())
}

fn sample(common: &Common) -> Result<()> {
    let config = common.load()?;
    let out = out_dir(&config)?;
    let dataset = load_dataset(&config)?;
    let field = build_field(&config, &dataset)?;
    let samples = draw_samples(&config, &dataset, field.as_ref())?;
    if dataset.is_points() {
        write_points_csv(&out.join("samples.csv"), &samples, true)?;
    } else {
        for (i, s) in samples.iter().enumerate() {
            let img = s.clone().reshape(dataset.item_shape())?.map(|v| v.clamp(-1.0, 1.0));
            let ext = if img.shape().len() == 3 { "ppm" } else { "pgm" };
            write_netpbm(&out.join(format!("sample_{i:04}.{ext}")), &img)?;
        }
    }
    println!("wrote {} samples to {}", samples.len(), out.display());
    Ok(())
}

/// Returns false when every item failed.
fn solve(common: &Common) -> Result<bool> {
    let config = common.load()?;
    let out = out_dir(&config)?;
    let manifest = run_experiment(&config, Some(&out))?;
    let a = &manifest.aggregate;
    println!(
        "{}: {} ok, {} failed; psnr {} (degraded {}), ssim {}, mse {}",
        manifest.task.name(),
        a.n_ok,
        a.n_failed,
        fmt_opt(a.psnr),
        fmt_opt(a.degraded_psnr),
        fmt_opt(a.ssim),
        fmt_opt(a.mse),
    );
    for item in manifest.items.iter().filter(|i| !i.ok) {
        eprintln!("item {}: {}", item.index, item.error.as_deref().unwrap_or("failed"));
    }
    Ok(a.n_ok > 0)
}

fn eval(reference: &Path, estimate: &Path, out: Option<&Path>) -> Result<()> {
    let scores = compare_paths(reference, estimate)?;
    let n = scores.len() as f64;
    let mean_psnr = scores.iter().map(|s| s.psnr).sum::<f64>() / n;
    let mean_mse = scores.iter().map(|s| s.mse).sum::<f64>() / n;
    let ssims: Option<Vec<f64>> = scores.iter().map(|s| s.ssim).collect();
    let mean_ssim = ssims.map(|v| v.iter().sum::<f64>() / n);
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut text = String::from("name,mse,psnr,ssim\n");
        for s in &scores {
            let ssim = s.ssim.map(|v| format!("{v:e}")).unwrap_or_default();
            text.push_str(&format!("{},{:e},{:e},{ssim}\n", s.name, s.mse, s.psnr));
        }
        let path = dir.join("eval.csv");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    println!("{} pairs: psnr {mean_psnr:.4}, ssim {}, mse {mean_mse:.6}", scores.len(), fmt_opt(mean_ssim));
    Ok(())
}

fn gridsearch(common: &Common, alphas: Option<&[f64]>, steps: Option<&[usize]>) -> Result<()> {
    let config = common.load()?;
    let out = out_dir(&config)?;
    let result = grid_search(&config, alphas.unwrap_or(&DEFAULT_ALPHAS), steps.unwrap_or(&DEFAULT_STEPS))?;
    write_score_table(&out.join("scores.csv"), &result.table)?;
    let path = out.join("best.toml");
    fs::write(&path, result.best.to_toml()?).map_err(|e| Error::io(&path, e))?;
    println!(
        "best alpha {} steps {}: psnr {:.4}",
        result.best.solver.alpha, result.best.solver.steps, result.best_score
    );
    Ok(())
}

fn check(seed: u64, out: Option<&Path>) -> Result<bool> {
    let results = run_checks(seed)?;
    let mut text = String::from("name,passed,detail\n");
    for r in &results {
        println!("{:<14} {}  {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        text.push_str(&format!("{},{},\"{}\"\n", r.name, r.passed, r.detail));
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("checks.csv");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(results.iter().all(|r| r.passed))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Train(c) => train(c)?,
        Command::Sample(c) => sample(c)?,
        Command::Solve(c) => {
            if !solve(c)? {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Eval { reference, estimate, out } => eval(reference, estimate, out.as_deref())?,
        Command::Gridsearch { common, alphas, steps } => gridsearch(common, alphas.as_deref(), steps.as_deref())?,
        Command::Check { seed, out } => {
            if !check(*seed, out.as_deref())? {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
