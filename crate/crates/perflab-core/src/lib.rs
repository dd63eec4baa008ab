//! Bounded-progression models, fitting, and analysis for performance time
//! series.
//!
//! The crate is organised around a small data model ([`series`]), a
//! Levenberg-Marquardt fit engine ([`fit`]), a registry of growth and decline
//! models ([`models`]), and the analyses built on them: period segmentation
//! ([`segment`]), asymptotic limit forecasts ([`limits`]), atypicity scoring
//! ([`atypicity`]) and birth/lifespan density meshes ([`density`]).
//!
//! All randomised procedures take an explicit seed and are reproducible
//! across platforms and thread counts.

pub mod atypicity;
pub mod density;
pub mod fit;
pub mod limits;
pub mod models;
pub mod segment;
pub mod series;

mod stats;

use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A precondition on the amount of data was not met.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An argument was outside the domain of the operation.
    #[error("{0}")]
    Domain(String),

    /// A text input could not be parsed. `line` is 1-based and counts the
    /// header.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The requested model id is not registered. The second field lists the
    /// registered ids.
    #[error("unknown model '{0}'; registered models are: {1}")]
    UnknownModel(String, String),

    /// A mesh resolution that does not evenly divide both data spans.
    #[error("invalid mesh resolution a={a}: {reason}")]
    InvalidResolution { a: f64, reason: String },

    /// A fit did not converge within the iteration budget.
    #[error("fit of '{0}' did not converge")]
    NonConvergence(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
