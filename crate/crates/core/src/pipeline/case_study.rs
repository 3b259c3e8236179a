use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::learn::{knn_label, pca_2d, PcaProjection, Standardizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyRepo {
    pub company: String,
    pub repo: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub company: String,
    pub repo: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudy {
    pub k: usize,
    pub rows: Vec<CaseRow>,
    /// Fraction of repos labeled with their own company.
    pub self_label_rate: f64,
    pub pca: PcaProjection,
}

/// Leave-one-out KNN over company labels on z-scored features, plus a 2D
/// PCA projection of the same standardized points.
pub fn case_study(repos: &[CompanyRepo], k: usize) -> Result<CaseStudy, PipelineError> {
    let mut companies: Vec<&str> = repos.iter().map(|r| r.company.as_str()).collect();
    companies.sort_unstable();
    companies.dedup();
    if companies.len() < 2 {
        return Err(PipelineError::InsufficientCorpus(format!(
            "need at least 2 companies, found {}",
            companies.len()
        )));
    }
    if k == 0 || k >= repos.len() {
        return Err(PipelineError::InsufficientCorpus(format!(
            "k = {k} must be in 1..{}",
            repos.len()
        )));
    }
    let x: Vec<Vec<f64>> = repos.iter().map(|r| r.values.clone()).collect();
    let z = Standardizer::fit(&x)?.transform_all(&x)?;
    let rows = crate::par::try_map_range(repos.len(), |i| {
        let train: Vec<(Vec<f64>, String)> = z
            .iter()
            .zip(repos)
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (v, r))| (v.clone(), r.company.clone()))
            .collect();
        let predicted = knn_label(&train, &z[i], k)?;
        Ok::<_, PipelineError>(CaseRow {
            company: repos[i].company.clone(),
            repo: repos[i].repo.clone(),
            predicted,
        })
    })?;
    let hits = rows.iter().filter(|r| r.company == r.predicted).count();
    Ok(CaseStudy {
        k,
        self_label_rate: hits as f64 / rows.len() as f64,
        pca: pca_2d(&z)?,
        rows,
    })
}
