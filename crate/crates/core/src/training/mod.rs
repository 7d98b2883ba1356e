//! Training a neural velocity field with the conditional flow-matching objective.

mod adam;
mod assign;
mod cfm;
mod mlp;
mod params_io;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use assign::{hungarian, minibatch_ot_assign, squared_distance_matrix, OtPlan, MAX_OT_BATCH};
pub use cfm::{cfm_loss, train_cfm, train_cfm_with, TrainConfig, TrainCoupling, TrainOutcome, DIVERGENCE_LOSS};
pub use mlp::{mlp_forward, mlp_param_grads, ForwardCache, MlpField, MlpParams, MlpSpec, TIME_FEATURES};
pub use params_io::{
    load_params, read_params, save_params, write_loss_csv, write_params, PARAMS_MAGIC, PARAMS_VERSION,
};
