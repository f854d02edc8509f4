//! Multiresolution heterogeneous calibration toolkit: parameter-space
//! handling, run schedules, an ensemble optimizer, factorial sensitivity
//! screening, a synthetic double-model testbed, and evaluation statistics.

pub mod config;
pub mod error;
pub mod experiment;
pub mod models;
pub mod report;
pub mod objective;
pub mod optimizer;
pub mod plan;
pub mod sensitivity;
pub mod space;
pub mod stats;

pub use error::{Error, Result};
