//! Experimental protocols: activity-quartile clustering, per-cluster
//! evaluation against the majority baseline, leave-one-out and family
//! ablations, and the company case study.

mod ablation;
mod case_study;
mod clusters;
mod evaluate;
mod report;

use thiserror::Error;

pub use ablation::{
    ablation_groups, ablation_leave_one_out, block_units, group_combinations, loo_units, resolve_units,
    AblationReport, AblationUnit, GroupCell, LooCell, SEQ_EMB_UNIT,
};
pub use case_study::{case_study, CaseRow, CaseStudy, CompanyRepo};
pub use clusters::{clusters_with_cuts, nearest_rank, quartile_clusters, ClusterAssignment, ClusterId};
pub use evaluate::{
    binary_labels, evaluate_clusters, evaluate_members, permuted_labels, run_once, stratified_split, ClusterEval,
    ComparisonRow, EvalConfig, EvalReport,
};
pub use report::{
    write_case_study_csv, write_eval_csv, write_groups_csv, write_loo_csv, write_pca_csv, Summary,
    SUMMARY_VERSION,
};

use crate::features::{FeatureSchema, FeatureTable};
use crate::learn::LearnError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("need at least 4 repositories to form quartile clusters, got {0}")]
    TooFewRepos(usize),
    #[error("cluster {0} is too small for a stratified split")]
    ClusterTooSmall(String),
    #[error("unknown feature name `{0}`")]
    UnknownFeatureName(String),
    #[error("insufficient corpus: {0}")]
    InsufficientCorpus(String),
    #[error("row `{0}` has no label")]
    MissingLabel(String),
    #[error("row `{0}` has no activity count")]
    MissingActivityCount(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Labeled feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub activity_counts: Vec<u64>,
}

impl Dataset {
    /// Every row needs a label; rows without an activity count get 0 and a
    /// later clustering call will see them as the smallest repos.
    pub fn from_table(table: &FeatureTable) -> Result<Self, PipelineError> {
        let mut ids = Vec::with_capacity(table.rows.len());
        let mut x = Vec::with_capacity(table.rows.len());
        let mut labels = Vec::with_capacity(table.rows.len());
        let mut activity_counts = Vec::with_capacity(table.rows.len());
        for r in &table.rows {
            let label = r.label.clone().ok_or_else(|| PipelineError::MissingLabel(r.repo_id.clone()))?;
            ids.push(r.repo_id.clone());
            x.push(r.values.clone());
            labels.push(label);
            activity_counts.push(r.activity_count.unwrap_or(0));
        }
        Ok(Dataset {
            schema: table.schema.clone(),
            ids,
            x,
            labels,
            activity_counts,
        })
    }

    /// Activity counts, failing if any row lacked one in the source table.
    pub fn require_counts(table: &FeatureTable) -> Result<Vec<u64>, PipelineError> {
        table
            .rows
            .iter()
            .map(|r| r.activity_count.ok_or_else(|| PipelineError::MissingActivityCount(r.repo_id.clone())))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.schema.len()
    }

    pub fn with_labels(&self, labels: Vec<String>) -> Self {
        Dataset {
            labels,
            ..self.clone()
        }
    }
}
