//! Measure and compare the uncertainty calibration of probabilistic
//! classifiers from prediction logs.
//!
//! The crate covers:
//!
//! * [`records`] — the prediction-log data model and line-delimited
//!   ingestion/serialization,
//! * [`scoring`] — perplexity-to-probability normalization for
//!   multiple-choice answers,
//! * [`calibration`] — uniform and equal-mass binning plus the ECE, SCE,
//!   ACE, RMSCE, and MAD estimators,
//! * [`reliability`] — reliability-diagram data and deterministic SVG/CSV
//!   rendering,
//! * [`smoothing`] — label-smoothing losses, gradients, logit distances,
//!   and the numerically verified KL sandwich,
//! * [`toytrain`] — a small softmax-regression trainer with a synthetic
//!   distribution-shift generator,
//! * [`analysis`] — grouped metric reports and significance-tested
//!   comparisons.
//!
//! Batch work (bound sweeps, experiment runs, grouped reports) runs
//! data-parallel under the `parallel` feature (on by default) and falls
//! back to sequential loops without it; outputs are bit-identical either
//! way.

pub mod analysis;
pub mod calibration;
pub mod error;
mod par;
pub mod records;
pub mod reliability;
pub mod rng;
pub mod scoring;
pub mod smoothing;
pub mod toytrain;

pub use error::{Error, Result};
