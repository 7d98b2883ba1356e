//! Plug-and-play iterations built on a flow-matching denoiser.

mod blind;
mod convergence;
mod fbs;
mod pnp;
mod schedule;

pub use blind::{blind_deblur_solve, delta_kernel, BlindConfig, BlindOutcome};
pub use convergence::{convergence_report, ConvergenceReport};
pub use fbs::{pnp_fbs_solve, FbsConfig};
pub use pnp::{
    pnp_flow_solve, pnp_flow_solve_with, pnp_flow_step, Init, SolveConfig, SolveTrace, StepDetail, StepRecord,
    DIVERGENCE_BOUND,
};
pub use schedule::{lr_schedule, Schedule, StepSize};
