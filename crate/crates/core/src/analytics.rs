//! Distribution comparisons: pooled event-type distributions, smoothed KL
//! divergence and unpooled two-sample z-tests.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventType, RepoRecord};

/// Additive smoothing applied to every cell before computing KL.
pub const KL_EPSILON: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("no events qualify for the distribution")]
    EmptyEventPool,
    #[error("distributions have different supports")]
    SupportMismatch,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("each sample needs at least 2 values (got {0} and {1})")]
    InsufficientSamples(usize, usize),
    #[error("both samples have zero variance but different means")]
    ZeroVariance,
}

/// A categorical distribution over a named, ordered support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbDist {
    pub support: Vec<String>,
    pub probs: Vec<f64>,
}

impl ProbDist {
    pub fn new(support: Vec<String>, probs: Vec<f64>) -> Result<Self, AnalyticsError> {
        if support.len() != probs.len() || probs.is_empty() {
            return Err(AnalyticsError::InvalidDistribution(
                "support and probabilities differ in length".into(),
            ));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(AnalyticsError::InvalidDistribution("negative or non-finite mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(AnalyticsError::InvalidDistribution(format!("mass sums to {total}")));
        }
        Ok(ProbDist { support, probs })
    }

    /// Normalizes non-negative counts.
    pub fn from_counts(support: Vec<String>, counts: &[f64]) -> Result<Self, AnalyticsError> {
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(AnalyticsError::EmptyEventPool);
        }
        Self::new(support, counts.iter().map(|c| c / total).collect())
    }

    /// Unlabeled distribution with support `0..n`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, AnalyticsError> {
        let support = (0..probs.len()).map(|i| i.to_string()).collect();
        Self::new(support, probs)
    }

    pub fn prob(&self, category: &str) -> Option<f64> {
        self.support
            .iter()
            .position(|s| s == category)
            .map(|i| self.probs[i])
    }
}

/// Pooled event-type distribution over all records. The support is the 14
/// types in index order, or the 13 development types when Watch is excluded.
pub fn event_type_distribution(records: &[RepoRecord], include_watch: bool) -> Result<ProbDist, AnalyticsError> {
    let types: Vec<EventType> = EventType::ALL
        .into_iter()
        .filter(|t| include_watch || t.is_development())
        .collect();
    let mut counts = [0f64; EventType::COUNT];
    for rec in records {
        for e in &rec.events {
            counts[e.event_type.index()] += 1.0;
        }
    }
    let counts: Vec<f64> = types.iter().map(|t| counts[t.index()]).collect();
    ProbDist::from_counts(types.iter().map(|t| t.name().to_string()).collect(), &counts)
}

fn smooth(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().map(|x| x + KL_EPSILON).sum();
    p.iter().map(|x| (x + KL_EPSILON) / total).collect()
}

/// `KL(p || q)` in nats after ε-smoothing both distributions.
pub fn kl_divergence(p: &ProbDist, q: &ProbDist) -> Result<f64, AnalyticsError> {
    if p.support != q.support {
        return Err(AnalyticsError::SupportMismatch);
    }
    let ps = smooth(&p.probs);
    let qs = smooth(&q.probs);
    Ok(ps
        .iter()
        .zip(&qs)
        .map(|(a, b)| if *a == 0.0 { 0.0 } else { a * (a / b).ln() })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTestResult {
    pub z: f64,
    pub p_two_sided: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sample z-test with unpooled (per-sample, n−1) variances.
pub fn two_sample_z_test(a: &[f64], b: &[f64]) -> Result<ZTestResult, AnalyticsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(AnalyticsError::InsufficientSamples(a.len(), b.len()));
    }
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    let se = (var_a / a.len() as f64 + var_b / b.len() as f64).sqrt();
    let (z, p) = if se == 0.0 {
        if mean_a == mean_b {
            (0.0, 1.0)
        } else {
            return Err(AnalyticsError::ZeroVariance);
        }
    } else {
        let z = (mean_a - mean_b) / se;
        // 2(1 − Φ(|z|)) written via erfc to keep precision in the tail.
        (z, libm::erfc(z.abs() / std::f64::consts::SQRT_2))
    };
    Ok(ZTestResult {
        z,
        p_two_sided: p,
        mean_a,
        mean_b,
        n_a: a.len(),
        n_b: b.len(),
    })
}

/// One line of the comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub metric: String,
    pub group_a: String,
    pub group_b: String,
    pub value: f64,
    pub p_value: Option<f64>,
}

/// Writes `metric,group_a,group_b,value,p_value`; KL rows leave p_value blank.
/// p-values use exponent notation since they can be vanishingly small.
pub fn write_stats_csv<W: Write>(rows: &[StatRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "group_a", "group_b", "value", "p_value"])?;
    for r in rows {
        w.write_record([
            r.metric.clone(),
            r.group_a.clone(),
            r.group_b.clone(),
            format!("{}", r.value),
            r.p_value.map(|p| format!("{p:e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
