//! Experiment harness: configuration, data, file formats, scoring and search.

pub mod checks;
pub mod compare;
pub mod config;
pub mod csv_io;
pub mod data;
pub mod experiment;
pub mod gridsearch;
pub mod model;
pub mod netpbm;

pub use compare::{compare_paths, PairScore};
pub use config::{ExperimentConfig, Task};
pub use data::{build_field, build_operator, load_dataset, shapes_image, Dataset};
pub use experiment::{evaluate, run_experiment, Aggregate, ItemRecord, Manifest, Resources};
pub use gridsearch::{grid_search, write_score_table, GridSearchResult, ScoreRow, DEFAULT_ALPHAS, DEFAULT_STEPS};
pub use model::{draw_samples, train_config, train_model};
