//! Test items, priors and forward models resolved from an [`ExperimentConfig`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::bench::config::{AnalyticCoupling, DataKind, ExperimentConfig, ModelKind, Task};
use crate::bench::netpbm::read_netpbm;
use crate::dist::{Component, LatentSpec, TargetSpec};
use crate::error::{Error, Result};
use crate::flows::{GaussIndepField, GaussOtField, GmmIndepField, VelocityField};
use crate::grid::Grid;
use crate::inverse::{gaussian_kernel, DegradationOp};
use crate::rng::RngState;
use crate::training::{load_params, MlpField};

// Sub-streams of the experiment seed.
pub(crate) const STREAM_TRAIN: u64 = 0;
pub(crate) const STREAM_TEST: u64 = 1;
pub(crate) const STREAM_VALIDATION: u64 = 2;
pub(crate) const STREAM_ITEMS: u64 = 3;
pub(crate) const STREAM_SAMPLES: u64 = 4;
pub(crate) const STREAM_TRAINING: u64 = 5;

/// A procedural `[C, H, W]` (or `[H, W]` for one channel) image in `[-1, 1]`:
/// a dark background with a few bright disks and bars.
pub fn shapes_image(size: usize, channels: usize, rng: &mut RngState) -> Grid {
    let plane = size * size;
    let mut data = vec![-0.8; channels * plane];
    let count = 1 + rng.index(3);
    for _ in 0..count {
        let color: Vec<f64> = (0..channels).map(|_| 0.2 + 0.8 * rng.uniform()).collect();
        let ci = rng.uniform() * size as f64;
        let cj = rng.uniform() * size as f64;
        let r = (0.15 + 0.2 * rng.uniform()) * size as f64;
        let disk = rng.uniform() < 0.5;
        for i in 0..size {
            for j in 0..size {
                let (di, dj) = (i as f64 + 0.5 - ci, j as f64 + 0.5 - cj);
                let inside = if disk { di * di + dj * dj <= r * r } else { di.abs() <= r && dj.abs() <= 0.4 * r };
                if inside {
                    for (ch, c) in color.iter().enumerate() {
                        data[ch * plane + i * size + j] = *c;
                    }
                }
            }
        }
    }
    let shape = if channels == 1 { vec![size, size] } else { vec![channels, size, size] };
    Grid::from_parts(data, shape)
}

/// Prior, test items and validation items of an experiment.
#[derive(Clone, Debug)]
pub struct Dataset {
    /// Layout of one item; mixture priors store flattened means.
    pub shape: Vec<usize>,
    pub prior: TargetSpec,
    pub test: Vec<Grid>,
    pub validation: Vec<Grid>,
}

impl Dataset {
    pub fn item_shape(&self) -> Vec<usize> {
        self.shape.clone()
    }

    pub fn is_points(&self) -> bool {
        self.item_shape().len() == 1
    }
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm" | "pnm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no .pgm/.ppm images in {}", dir.display())));
    }
    Ok(files)
}

fn read_images(dir: &Path) -> Result<Vec<Grid>> {
    let images = image_files(dir)?.iter().map(|p| read_netpbm(p)).collect::<Result<Vec<_>>>()?;
    if images.iter().any(|g| g.shape() != images[0].shape()) {
        return Err(Error::Config(format!("images in {} differ in size", dir.display())));
    }
    Ok(images)
}

/// Equal-weight mixture with one component per image.
pub fn image_mixture(images: &[Grid], scale: f64) -> Result<TargetSpec> {
    let w = 1.0 / images.len() as f64;
    TargetSpec::mixture(images.iter().map(|g| Component { weight: w, mean: g.data().to_vec(), scale }).collect())
}

pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let d = &config.data;
    let root = RngState::new(config.experiment.seed);
    let n_test = config.experiment.items;
    let n_val = config.experiment.validation_items;
    let draw = |spec: &TargetSpec, stream: u64, n: usize| -> Vec<Grid> {
        let base = root.fork(stream);
        (0..n).map(|i| spec.sample_one(&mut base.fork(i as u64))).collect()
    };
    match d.kind {
        DataKind::Gaussian | DataKind::Mixture => {
            let prior = match d.kind {
                DataKind::Gaussian => TargetSpec::gaussian(d.mean.clone(), d.scale)?,
                _ => TargetSpec::mixture(config.components())?,
            };
            let test = draw(&prior, STREAM_TEST, n_test);
            let validation = draw(&prior, STREAM_VALIDATION, n_val);
            Ok(Dataset { shape: prior.shape(), prior, test, validation })
        }
        DataKind::Shapes => {
            let gen = |stream: u64, n: usize| -> Vec<Grid> {
                let base = root.fork(stream);
                (0..n).map(|i| shapes_image(d.image_size, d.channels, &mut base.fork(i as u64))).collect()
            };
            let train = gen(STREAM_TRAIN, d.train_items);
            let shape = train[0].shape().to_vec();
            let prior = image_mixture(&train, d.scale)?;
            Ok(Dataset { shape, prior, test: gen(STREAM_TEST, n_test), validation: gen(STREAM_VALIDATION, n_val) })
        }
        DataKind::Images => {
            let dir = |p: &Option<PathBuf>, name: &str| {
                p.clone().ok_or_else(|| Error::Config(format!("image data needs data.{name}")))
            };
            let train = read_images(&dir(&d.train_dir, "train_dir")?)?;
            let shape = train[0].shape().to_vec();
            let mut test = read_images(&dir(&d.test_dir, "test_dir")?)?;
            if n_test > 0 {
                test.truncate(n_test);
            }
            let validation = match &d.validation_dir {
                Some(v) => read_images(v)?,
                None => test.clone(),
            };
            for g in test.iter().chain(&validation) {
                if g.shape() != shape.as_slice() {
                    return Err(Error::Config(format!(
                        "test image shape {:?} differs from training shape {shape:?}",
                        g.shape()
                    )));
                }
            }
            let prior = image_mixture(&train, d.scale)?;
            Ok(Dataset { shape, prior, test, validation })
        }
    }
}

/// Resolves the velocity field named by `[model]`.
pub fn build_field(config: &ExperimentConfig, dataset: &Dataset) -> Result<Arc<dyn VelocityField>> {
    let dim: usize = dataset.item_shape().iter().product();
    let field: Arc<dyn VelocityField> = match config.model.kind {
        ModelKind::Analytic => {
            if config.data.latent != crate::bench::config::LatentKind::Gaussian {
                return Err(Error::Config("analytic fields assume a Gaussian latent".into()));
            }
            match (&dataset.prior, config.model.coupling) {
                (TargetSpec::IsotropicGaussian { mean, scale }, AnalyticCoupling::Independent) => {
                    Arc::new(GaussIndepField::new(mean.clone(), *scale)?)
                }
                (TargetSpec::IsotropicGaussian { mean, scale }, AnalyticCoupling::Ot) => {
                    Arc::new(GaussOtField::new(mean.clone(), *scale)?)
                }
                (TargetSpec::GaussianMixture(c), AnalyticCoupling::Independent) => {
                    Arc::new(GmmIndepField::new(c.clone())?)
                }
                (_, AnalyticCoupling::Ot) => {
                    return Err(Error::Config("the analytic OT field needs Gaussian data".into()))
                }
                (TargetSpec::Empirical(_), _) => {
                    return Err(Error::Config("no analytic field for empirical data".into()))
                }
            }
        }
        ModelKind::Mlp => {
            let path = config
                .model
                .params
                .as_ref()
                .ok_or_else(|| Error::Config("model.kind = \"mlp\" needs model.params".into()))?;
            Arc::new(MlpField::new(load_params(path)?))
        }
    };
    if field.dim() != dim {
        return Err(Error::Config(format!("model acts on {} coordinates, data has {dim}", field.dim())));
    }
    Ok(field)
}

pub fn latent_for(config: &ExperimentConfig, dataset: &Dataset) -> LatentSpec {
    config.latent(&dataset.item_shape())
}

/// The forward operator for one item; `mask_seed` feeds random masks.
pub fn build_operator(config: &ExperimentConfig, shape: &[usize], mask_seed: u64) -> Result<DegradationOp> {
    let op = &config.operator;
    let task = config.experiment.task;
    if task == Task::Denoise {
        return Ok(DegradationOp::Identity);
    }
    let (_, h, w) = match *shape {
        [h, w] => (1, h, w),
        [c, h, w] => (c, h, w),
        _ => return Err(Error::Config(format!("task {} needs image data", task.name()))),
    };
    match task {
        Task::Denoise => Ok(DegradationOp::Identity),
        Task::Deblur | Task::BlindDeblur => {
            if op.kernel_size > h || op.kernel_size > w {
                return Err(Error::Config(format!("kernel of size {} does not fit {h}x{w}", op.kernel_size)));
            }
            DegradationOp::conv_blur(gaussian_kernel(op.kernel_size, op.blur_sigma)?)
        }
        Task::Superres => {
            if h % op.factor != 0 || w % op.factor != 0 {
                return Err(Error::Config(format!("factor {} does not divide {h}x{w}", op.factor)));
            }
            DegradationOp::downsample(op.factor)
        }
        Task::InpaintBox => DegradationOp::mask_box_centered(op.mask_size.unwrap_or(h.min(w) / 2), h, w),
        Task::InpaintRandom => DegradationOp::mask_random(op.mask_rate, mask_seed, h, w),
    }
}
