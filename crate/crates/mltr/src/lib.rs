//! File formats, configuration and experiment orchestration for meta
//! learning-to-rank, on top of the `mltr-core` algorithms.
//!
//! * [`letor`]: LETOR / SVM-light parsing and writing.
//! * [`data`]: corpus discovery and loading.
//! * [`checkpoint`]: binary and text parameter checkpoints.
//! * [`config`]: the TOML experiment config.
//! * [`experiment`]: arm training, fine-tuning, evaluation and sweeps.
//! * [`report`]: CSV and JSON-lines result tables.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod letor;
pub mod report;

pub use error::{AppError, Result};
