//! Plug-and-play flow matching for linear inverse problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod dist;
pub mod error;
pub mod flows;
pub mod grid;
pub mod inverse;
pub mod metrics;
pub mod rng;
pub mod solver;
pub mod training;

pub use error::{Error, Result};
pub use grid::{interp_et, Grid};
pub use rng::RngState;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/inverse.md")]
    mod inverse {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
