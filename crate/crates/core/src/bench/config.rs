//! The experiment file: a TOML document with one table per concern.
//!
//! ```toml
//! [experiment]
//! task = "denoise"
//! seed = 7
//! items = 100
//!
//! [data]
//! kind = "gaussian"
//! mean = [7.0, 7.0]
//! scale = 0.5
//!
//! [operator]
//! sigma = 1.5
//!
//! [solver]
//! steps = 100
//! alpha = 0.5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::{Component, LatentSpec};
use crate::error::{Error, Result};
use crate::inverse::{FidelityKind, NoiseModel};
use crate::solver::{BlindConfig, Init, Schedule, SolveConfig, StepSize};
use crate::training::{AdamConfig, MlpSpec, TrainCoupling};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Denoise,
    Deblur,
    Superres,
    InpaintBox,
    InpaintRandom,
    BlindDeblur,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Denoise => "denoise",
            Task::Deblur => "deblur",
            Task::Superres => "superres",
            Task::InpaintBox => "inpaint_box",
            Task::InpaintRandom => "inpaint_random",
            Task::BlindDeblur => "blind_deblur",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub operator: OperatorSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    /// Number of test items drawn from synthetic data.
    #[serde(default = "default_items")]
    pub items: usize,
    /// Held-out items used by the grid search.
    #[serde(default = "default_validation_items")]
    pub validation_items: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_items() -> usize {
    100
}

fn default_validation_items() -> usize {
    20
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    /// `N(mean, scale^2 I)`.
    #[default]
    Gaussian,
    /// Isotropic Gaussian mixture from `components`.
    Mixture,
    /// Procedural grayscale or color images of disks and bars.
    Shapes,
    /// NetPBM files from `train_dir` / `test_dir` / `validation_dir`.
    Images,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LatentKind {
    #[default]
    Gaussian,
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSection {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub kind: DataKind,
    pub latent: LatentKind,
    pub mean: Vec<f64>,
    /// Standard deviation of the Gaussian target, or of each image-centered
    /// mixture component for image data.
    pub scale: f64,
    pub components: Vec<ComponentSection>,
    pub image_size: usize,
    pub channels: usize,
    /// Prior images for `shapes` data.
    pub train_items: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_dir: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            kind: DataKind::Gaussian,
            latent: LatentKind::Gaussian,
            mean: vec![7.0, 7.0],
            scale: 0.5,
            components: Vec::new(),
            image_size: 16,
            channels: 1,
            train_items: 64,
            train_dir: None,
            test_dir: None,
            validation_dir: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Laplace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    #[default]
    L2,
    WeightedL2,
    L1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorSection {
    /// Gaussian standard deviation, or Laplace scale.
    pub sigma: f64,
    pub noise: NoiseKind,
    pub fidelity: FidelityMode,
    pub blur_sigma: f64,
    pub kernel_size: usize,
    /// Side of the centered box; defaults to half the image side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_size: Option<usize>,
    pub mask_rate: f64,
    pub factor: usize,
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection {
            sigma: 0.2,
            noise: NoiseKind::Gaussian,
            fidelity: FidelityMode::L2,
            blur_sigma: 1.0,
            kernel_size: 5,
            mask_size: None,
            mask_rate: 0.7,
            factor: 2,
        }
    }
}

impl OperatorSection {
    pub fn noise_model(&self) -> NoiseModel {
        match self.noise {
            NoiseKind::Gaussian => NoiseModel::Gaussian { sigma: self.sigma },
            NoiseKind::Laplace => NoiseModel::Laplace { scale: self.sigma },
        }
    }

    pub fn fidelity_kind(&self) -> FidelityKind {
        match self.fidelity {
            FidelityMode::L2 => FidelityKind::GaussianL2,
            FidelityMode::WeightedL2 => FidelityKind::WeightedL2 { sigma: self.sigma },
            FidelityMode::L1 => FidelityKind::LaplaceL1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Closed-form field of the data distribution.
    #[default]
    Analytic,
    /// Trained network loaded from `params`.
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticCoupling {
    #[default]
    Independent,
    Ot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Only meaningful for Gaussian data.
    pub coupling: AnalyticCoupling,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Uniform,
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Backprojection,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub schedule: ScheduleKind,
    pub steps: usize,
    pub include_endpoint: bool,
    pub q: f64,
    pub n_max: usize,
    pub alpha: f64,
    /// Constant step size, overriding `alpha`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub averaging: usize,
    pub init: InitKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_noise: Option<f64>,
    pub kernel_lr: f64,
    pub kernel_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            schedule: ScheduleKind::Uniform,
            steps: 100,
            include_endpoint: false,
            q: 0.9,
            n_max: 200,
            alpha: 0.5,
            gamma: None,
            averaging: 5,
            init: InitKind::Backprojection,
            clip_noise: None,
            kernel_lr: 1e-2,
            kernel_steps: 1,
        }
    }
}

impl SolverSection {
    pub fn solve_config(&self, seed: u64) -> SolveConfig {
        let schedule = match self.schedule {
            ScheduleKind::Uniform => Schedule::Uniform { steps: self.steps, include_endpoint: self.include_endpoint },
            ScheduleKind::Geometric => Schedule::Geometric { q: self.q, n_max: self.n_max },
        };
        SolveConfig {
            schedule,
            step_size: match self.gamma {
                Some(g) => StepSize::Constant(g),
                None => StepSize::Power { alpha: self.alpha },
            },
            averaging: self.averaging,
            seed,
            init: match self.init {
                InitKind::Backprojection => Init::Backprojection,
                InitKind::Zero => Init::Zero,
            },
            clip_noise: self.clip_noise,
        }
    }

    pub fn blind_config(&self, seed: u64, kernel_size: usize) -> BlindConfig {
        BlindConfig {
            solve: self.solve_config(seed),
            kernel_size,
            kernel_lr: self.kernel_lr,
            kernel_steps: self.kernel_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainCouplingKind {
    Independent,
    #[default]
    MinibatchOt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub steps: usize,
    pub steps_per_epoch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub widths: Vec<usize>,
    pub coupling: TrainCouplingKind,
    /// Points drawn by the `sample` command.
    pub samples: usize,
    pub euler_steps: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainSection {
            batch_size: 128,
            steps: 2000,
            steps_per_epoch: 100,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            widths: vec![256, 256],
            coupling: TrainCouplingKind::MinibatchOt,
            samples: 1000,
            euler_steps: 100,
        }
    }
}

impl TrainSection {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, ..AdamConfig::default() }
    }

    pub fn coupling(&self) -> TrainCoupling {
        match self.coupling {
            TrainCouplingKind::Independent => TrainCoupling::Independent,
            TrainCouplingKind::MinibatchOt => TrainCoupling::MinibatchOt,
        }
    }

    pub fn mlp_spec(&self, input_dim: usize) -> Result<MlpSpec> {
        MlpSpec::new(input_dim, self.widths.clone())
    }
}

impl ExperimentConfig {
    pub fn new(task: Task) -> Self {
        ExperimentConfig {
            experiment: ExperimentSection {
                task,
                seed: 0,
                items: default_items(),
                validation_items: default_validation_items(),
                out: None,
            },
            data: DataSection::default(),
            operator: OperatorSection::default(),
            model: ModelSection::default(),
            solver: SolverSection::default(),
            train: TrainSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config; relative paths inside it are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        config.validate()?;
        Ok(config)
    }

    /// [`ExperimentConfig::load`] after applying dotted `key = value`
    /// overrides such as `("solver.alpha", "0.3")`. Values are parsed as TOML
    /// and fall back to plain strings.
    pub fn load_with_overrides(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut doc: toml::Table =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        for (key, value) in overrides {
            set_dotted(&mut doc, key, value)?;
        }
        let mut config = ExperimentConfig::deserialize(toml::Value::Table(doc))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        config.validate()?;
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        fix(&mut self.data.train_dir);
        fix(&mut self.data.test_dir);
        fix(&mut self.data.validation_dir);
        fix(&mut self.model.params);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The config as recorded in manifests: everything except the output directory.
    pub fn resolved(&self) -> Result<String> {
        let mut c = self.clone();
        c.experiment.out = None;
        c.to_toml()
    }

    /// SHA-256 of [`ExperimentConfig::resolved`], hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.resolved()?.as_bytes())))
    }

    pub fn latent_kind(&self) -> LatentKind {
        self.data.latent
    }

    pub fn latent(&self, shape: &[usize]) -> LatentSpec {
        match self.data.latent {
            LatentKind::Gaussian => LatentSpec::IsotropicGaussian { shape: shape.to_vec() },
            LatentKind::Dirichlet => LatentSpec::DirichletUniform { shape: shape.to_vec() },
        }
    }

    pub fn components(&self) -> Vec<Component> {
        self.data
            .components
            .iter()
            .map(|c| Component { weight: c.weight, mean: c.mean.clone(), scale: c.scale })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let d = &self.data;
        let op = &self.operator;
        let s = &self.solver;
        if self.experiment.items == 0 && !matches!(d.kind, DataKind::Images) {
            return bad("experiment.items must be at least 1".into());
        }
        match d.kind {
            DataKind::Gaussian => {
                if d.mean.is_empty() || !(d.scale > 0.0) {
                    return bad("gaussian data needs a non-empty mean and scale > 0".into());
                }
            }
            DataKind::Mixture => crate::dist::validate_mixture(&self.components())
                .map_err(|e| Error::Config(format!("data.components: {e}")))?,
            DataKind::Shapes => {
                if d.image_size < 4 || !(d.channels == 1 || d.channels == 3) || d.train_items == 0 {
                    return bad("shapes data needs image_size >= 4, 1 or 3 channels and train_items >= 1".into());
                }
            }
            DataKind::Images => {
                for (name, dir) in [("train_dir", &d.train_dir), ("test_dir", &d.test_dir)] {
                    match dir {
                        None => return bad(format!("image data needs data.{name}")),
                        Some(p) if !p.is_dir() => {
                            return bad(format!("data.{name} {} is not a directory", p.display()))
                        }
                        _ => {}
                    }
                }
                if let Some(p) = &d.validation_dir {
                    if !p.is_dir() {
                        return bad(format!("data.validation_dir {} is not a directory", p.display()));
                    }
                }
            }
        }
        if matches!(d.kind, DataKind::Shapes | DataKind::Images) && !(d.scale > 0.0) {
            return bad("data.scale must be positive".into());
        }
        let point_data = matches!(d.kind, DataKind::Gaussian | DataKind::Mixture);
        if point_data && self.experiment.task != Task::Denoise {
            return bad(format!("task {} needs image data", self.experiment.task.name()));
        }
        if !(op.sigma >= 0.0 && op.sigma.is_finite()) {
            return bad(format!("operator.sigma must be >= 0, got {}", op.sigma));
        }
        if op.fidelity == FidelityMode::WeightedL2 && op.sigma == 0.0 {
            return bad("weighted fidelity needs operator.sigma > 0".into());
        }
        if op.kernel_size.is_multiple_of(2) {
            return bad(format!("operator.kernel_size must be odd, got {}", op.kernel_size));
        }
        if !(op.blur_sigma > 0.0) {
            return bad("operator.blur_sigma must be positive".into());
        }
        if !(0.0..=1.0).contains(&op.mask_rate) {
            return bad("operator.mask_rate must lie in [0, 1]".into());
        }
        if op.factor == 0 {
            return bad("operator.factor must be at least 1".into());
        }
        if self.model.kind == ModelKind::Mlp {
            match &self.model.params {
                None => return bad("model.kind = \"mlp\" needs model.params".into()),
                Some(p) if !p.is_file() => return bad(format!("model.params {} does not exist", p.display())),
                _ => {}
            }
        }
        self.solver.solve_config(0).validate().map_err(|e| Error::Config(format!("solver: {e}")))?;
        if !(s.kernel_lr > 0.0) || s.kernel_steps == 0 {
            return bad("solver.kernel_lr must be positive and kernel_steps at least 1".into());
        }
        let t = &self.train;
        if t.batch_size == 0 || t.steps == 0 || t.steps_per_epoch == 0 || t.euler_steps == 0 {
            return bad("train sizes must be positive".into());
        }
        self.train.adam().validate().map_err(|e| Error::Config(format!("train: {e}")))?;
        MlpSpec::new(1, t.widths.clone()).map_err(|e| Error::Config(format!("train.widths: {e}")))?;
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let (last, tables) = parts.split_last().expect("non-empty");
    let mut table = doc;
    for part in tables {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table =
            entry.as_table_mut().ok_or_else(|| Error::Config(format!("override {key:?}: {part} is not a table")))?;
    }
    table.insert(last.to_string(), parse_value(raw));
    Ok(())
}
