//! Quantitative severity scoring of finger-tapping motor exams.
//!
//! The library turns per-frame hand-landmark time series (21-point hand
//! schema, normalized image coordinates) into a 0-4 severity prediction:
//!
//! 1. [`ingest`] parses landmark files, rating sheets, and demographics.
//! 2. [`signal`] derives the finger-tapping angle, repairs detection gaps,
//!    and segments the signal into taps.
//! 3. [`features`] condenses each recording into a fixed 65-feature vector.
//! 4. [`model`] fits gradient-boosted regression trees with per-participant
//!    cross-validation, recursive feature elimination, and optional
//!    minority oversampling.
//! 5. [`explain`] attributes predictions to features with tree SHAP.
//! 6. [`stats`] covers evaluation metrics, rater-agreement measures, and
//!    the hypothesis tests used for bias analysis.
//! 7. [`synth`] generates labeled synthetic recordings for end-to-end
//!    verification without clinical data.
//!
//! Everything is deterministic: fixed seeds, no platform entropy, no
//! iteration over unordered maps on any output path. Running the same
//! pipeline twice yields byte-identical artifacts.

pub mod config;
pub mod error;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod signal;
pub mod stats;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};

/// Version stamp embedded in every artifact this library writes.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
