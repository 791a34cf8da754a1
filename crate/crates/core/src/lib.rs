//! SeNMo: a self-normalizing deep network for multi-omics survival and
//! cancer-type prediction.
//!
//! The crate covers feature preprocessing and harmonization across cancer
//! cohorts, the SELU / alpha-dropout encoder with survival and
//! classification heads, the Cox / cross-entropy / L1 objective, training
//! with cross-validation and ensembling, and survival evaluation
//! (C-index, Kaplan-Meier, log-rank, risk stratification).

pub mod dataset;
pub mod error;
pub mod io;
pub mod losses;
pub mod math;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod training;

pub use error::{Error, Result};
