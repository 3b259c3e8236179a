use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{AblationReport, CaseStudy, EvalReport, PipelineError};
use crate::learn::write_metrics_table;

pub const SUMMARY_VERSION: u32 = 1;

/// Everything the protocols produced, bundled for `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation_loo: Option<AblationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation_groups: Option<AblationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_study: Option<CaseStudy>,
}

impl Default for Summary {
    fn default() -> Self {
        Summary {
            version: SUMMARY_VERSION,
            eval: None,
            ablation_loo: None,
            ablation_groups: None,
            case_study: None,
        }
    }
}

/// Table-3 layout: one row per cluster, then `Average` and `Single`.
pub fn write_eval_csv<W: Write>(r: &EvalReport, out: W) -> Result<(), PipelineError> {
    let mut rows: Vec<(String, crate::learn::Metrics)> =
        r.clusters.iter().map(|c| (c.name.clone(), c.metrics.clone())).collect();
    rows.push(("Average".into(), r.cluster_average.clone()));
    rows.push((r.single_group.name.clone(), r.single_group.metrics.clone()));
    write_metrics_table(&rows, &r.labels, out)?;
    Ok(())
}

/// `cluster,feature,accuracy_all,accuracy_without,delta` with full float
/// precision, so deltas can be recomputed exactly.
pub fn write_loo_csv<W: Write>(r: &AblationReport, out: W) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster", "feature", "accuracy_all", "accuracy_without", "delta"])?;
    for c in &r.loo {
        w.write_record([
            c.cluster.clone(),
            c.feature.clone(),
            c.accuracy_all.to_string(),
            c.accuracy_without.to_string(),
            c.delta.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `cluster,groups,accuracy`.
pub fn write_groups_csv<W: Write>(r: &AblationReport, out: W) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster", "groups", "accuracy"])?;
    for c in &r.groups {
        w.write_record([c.cluster.clone(), c.groups.clone(), c.accuracy.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `company,repo,predicted`.
pub fn write_case_study_csv<W: Write>(r: &CaseStudy, out: W) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["company", "repo", "predicted"])?;
    for c in &r.rows {
        w.write_record([&c.company, &c.repo, &c.predicted])?;
    }
    w.flush()?;
    Ok(())
}

/// `company,repo,pc1,pc2`.
pub fn write_pca_csv<W: Write>(r: &CaseStudy, out: W) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["company", "repo", "pc1", "pc2"])?;
    for (row, p) in r.rows.iter().zip(&r.pca.coords) {
        w.write_record([row.company.clone(), row.repo.clone(), p[0].to_string(), p[1].to_string()])?;
    }
    w.flush()?;
    Ok(())
}
