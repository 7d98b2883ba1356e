//! Training and sampling driven by the `[train]` table.

use rand::RngCore;

use crate::bench::config::ExperimentConfig;
use crate::bench::data::{latent_for, Dataset, STREAM_SAMPLES, STREAM_TRAINING};
use crate::error::Result;
use crate::flows::{euler_sample, VelocityField};
use crate::grid::Grid;
use crate::rng::RngState;
use crate::training::{train_cfm_with, MlpParams, TrainConfig, TrainOutcome};

pub fn train_config(config: &ExperimentConfig, dataset: &Dataset) -> TrainConfig {
    let t = &config.train;
    TrainConfig {
        batch_size: t.batch_size,
        steps: t.steps,
        steps_per_epoch: t.steps_per_epoch,
        seed: RngState::new(config.experiment.seed).fork(STREAM_TRAINING).next_u64(),
        latent: latent_for(config, dataset),
        target: dataset.prior.clone(),
        coupling: t.coupling(),
        adam: t.adam(),
    }
}

/// Trains a network on the experiment's prior.
pub fn train_model(
    config: &ExperimentConfig,
    dataset: &Dataset,
    on_epoch: impl FnMut(usize, &MlpParams),
) -> Result<TrainOutcome> {
    let dim = dataset.item_shape().iter().product();
    let spec = config.train.mlp_spec(dim)?;
    train_cfm_with(&train_config(config, dataset), &spec, on_epoch)
}

/// `train.samples` Euler samples from `field`, shaped like the data items.
pub fn draw_samples(config: &ExperimentConfig, dataset: &Dataset, field: &dyn VelocityField) -> Result<Vec<Grid>> {
    let latent = latent_for(config, dataset);
    let base = RngState::new(config.experiment.seed).fork(STREAM_SAMPLES);
    (0..config.train.samples)
        .map(|i| {
            let x0 = latent.sample_one(&mut base.fork(i as u64));
            euler_sample(field, &x0, config.train.euler_steps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::{ExperimentConfig, Task};
    use crate::bench::data::{build_field, load_dataset};

    #[test]
    fn samples_of_the_analytic_field_match_the_target() {
        let mut config = ExperimentConfig::new(Task::Denoise);
        config.train.samples = 2000;
        let ds = load_dataset(&config).unwrap();
        let field = build_field(&config, &ds).unwrap();
        let samples = draw_samples(&config, &ds, field.as_ref()).unwrap();
        let mean: f64 = samples.iter().map(|s| s.data()[0]).sum::<f64>() / 2000.0;
        assert!((mean - 7.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn short_training_run() {
        let mut config = ExperimentConfig::new(Task::Denoise);
        config.train.steps = 20;
        config.train.steps_per_epoch = 10;
        config.train.batch_size = 16;
        config.train.widths = vec![16];
        let ds = load_dataset(&config).unwrap();
        let mut epochs = 0;
        let out = train_model(&config, &ds, |_, _| epochs += 1).unwrap();
        assert_eq!(epochs, 2);
        assert_eq!(out.step_losses.len(), 20);
    }
}
