//! Experiment pipelines, file formats and command-line front end for
//! [`parahom_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fit;
pub mod output;
pub mod pipelines;
pub mod plot;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{AppError, AppResult};
pub use pipelines::{execute, Outcome};
