//! Conditional flow-matching training loop.

use ndarray::Array2;

use super::adam::{AdamConfig, AdamState};
use super::assign::{minibatch_ot_assign, MAX_OT_BATCH};
use super::mlp::{MlpField, MlpParams, MlpSpec};
use crate::dist::{LatentSpec, TargetSpec};
use crate::error::{Error, Result};
use crate::flows::VelocityField;
use crate::grid::{interp_et, Grid};
use crate::rng::RngState;

/// Losses above this abort training.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainCoupling {
    Independent,
    /// Re-pair each batch with an exact assignment on squared distances.
    MinibatchOt,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    /// Steps averaged into one entry of the epoch loss curve.
    pub steps_per_epoch: usize,
    pub seed: u64,
    pub latent: LatentSpec,
    pub target: TargetSpec,
    pub coupling: TrainCoupling,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch size must be at least 1".into()));
        }
        if self.coupling == TrainCoupling::MinibatchOt && self.batch_size > MAX_OT_BATCH {
            return Err(Error::Invalid(format!(
                "minibatch OT needs batch size <= {MAX_OT_BATCH}, got {}",
                self.batch_size
            )));
        }
        if self.steps == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Invalid("steps and steps_per_epoch must be positive".into()));
        }
        self.adam.validate()?;
        self.target.validate()?;
        let latent_len: usize = self.latent.shape().iter().product();
        let target_len: usize = self.target.shape().iter().product();
        if latent_len != target_len {
            return Err(Error::shape(self.latent.shape(), &self.target.shape()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// Minibatch loss at every step.
    pub step_losses: Vec<f64>,
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainOutcome {
    pub fn field(&self) -> MlpField {
        MlpField::new(self.params.clone())
    }

    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().expect("at least one epoch")
    }
}

/// Mean of `||v_{t_i}(e_{t_i}(x0_i, x1_i)) - (x1_i - x0_i)||^2`.
pub fn cfm_loss(field: &dyn VelocityField, x0: &[Grid], x1: &[Grid], t: &[f64]) -> Result<f64> {
    if x0.len() != x1.len() || x0.len() != t.len() {
        return Err(Error::Invalid(format!("batch sizes differ: {} / {} / {}", x0.len(), x1.len(), t.len())));
    }
    if x0.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let mut total = 0.0;
    for ((a, b), &ti) in x0.iter().zip(x1).zip(t) {
        let probe = interp_et(a, b, ti)?;
        let v = field.eval(ti, &probe)?;
        let target = b.sub(a)?;
        total += v.sub(&target)?.norm_sq();
    }
    Ok(total / x0.len() as f64)
}

pub fn train_cfm(config: &TrainConfig, spec: &MlpSpec) -> Result<TrainOutcome> {
    train_cfm_with(config, spec, |_, _| {})
}

/// Like [`train_cfm`], calling `on_epoch(epoch, params)` after each completed epoch.
pub fn train_cfm_with(
    config: &TrainConfig,
    spec: &MlpSpec,
    mut on_epoch: impl FnMut(usize, &MlpParams),
) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate()?;
    let d = spec.input_dim;
    let latent_len: usize = config.latent.shape().iter().product();
    if latent_len != d {
        return Err(Error::shape(&[d], config.latent.shape()));
    }
    let root = RngState::new(config.seed);
    let mut params = MlpParams::init(spec, &mut root.fork(0))?;
    let mut adam = AdamState::new(config.adam, spec.param_count())?;
    let b = config.batch_size;

    let mut step_losses = Vec::with_capacity(config.steps);
    let mut epoch_losses = Vec::new();
    let mut epoch_sum = 0.0;
    let mut epoch_len = 0;
    for step in 0..config.steps {
        let stream = root.fork(step as u64 + 1);
        let mut latent_rng = stream.fork(0);
        let mut target_rng = stream.fork(1);
        let mut time_rng = stream.fork(2);
        let x0: Vec<Grid> = (0..b).map(|_| config.latent.sample_one(&mut latent_rng)).collect();
        let mut x1: Vec<Grid> = (0..b)
            .map(|_| {
                let g = config.target.sample_one(&mut target_rng);
                Grid::from_parts(g.into_data(), vec![d])
            })
            .collect();
        if config.coupling == TrainCoupling::MinibatchOt {
            let plan = minibatch_ot_assign(&x0, &x1)?;
            x1 = plan.as_slice().iter().map(|&j| x1[j].clone()).collect();
        }
        let t: Vec<f64> = (0..b).map(|_| time_rng.uniform()).collect();

        let mut probes = Array2::zeros((b, d));
        let mut targets = Array2::zeros((b, d));
        for i in 0..b {
            let (a, c) = (x0[i].data(), x1[i].data());
            for k in 0..d {
                probes[[i, k]] = (1.0 - t[i]) * a[k] + t[i] * c[k];
                targets[[i, k]] = c[k] - a[k];
            }
        }
        let (loss, grads) = params.loss_and_grads(&t, probes.view(), targets.view())?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::TrainingDiverged { step, loss });
        }
        adam.step(params.as_mut_slice(), &grads)?;

        step_losses.push(loss);
        epoch_sum += loss;
        epoch_len += 1;
        if epoch_len == config.steps_per_epoch || step + 1 == config.steps {
            epoch_losses.push(epoch_sum / epoch_len as f64);
            on_epoch(epoch_losses.len() - 1, &params);
            epoch_sum = 0.0;
            epoch_len = 0;
        }
    }
    Ok(TrainOutcome { params, step_losses, epoch_losses })
}
