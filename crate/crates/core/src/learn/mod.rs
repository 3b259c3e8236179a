//! Classifiers and projections used by the evaluation protocols.

mod knn;
mod logreg;
mod metrics;
mod pca;
mod standardize;

use thiserror::Error;

pub use knn::{knn_label, knn_neighbors};
pub use logreg::{fit_logreg, fit_logreg_with_history, LogRegConfig, LogRegModel};
pub use metrics::{compute_metrics, write_metrics_table, ClassMetrics, Metrics};
pub use pca::{pca_2d, PcaProjection};
pub use standardize::Standardizer;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("k = {k} exceeds the {n} training points")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Checks every row has `d` columns and returns `d`.
pub(crate) fn check_rows(x: &[Vec<f64>]) -> Result<usize, LearnError> {
    let d = x.first().map(Vec::len).ok_or(LearnError::EmptyTrainingSet)?;
    for row in x {
        if row.len() != d {
            return Err(LearnError::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
    }
    Ok(d)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
