use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClusterAssignment, Dataset, PipelineError};
use crate::learn::{compute_metrics, fit_logreg, LogRegConfig, Metrics};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub seeds: Vec<u64>,
    pub test_fraction: f64,
    pub logreg: LogRegConfig,
    /// Wins probability ties; falls back to the first label in sorted order
    /// when absent from the data.
    pub positive_label: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seeds: (1..=5).collect(),
            test_fraction: 0.2,
            logreg: LogRegConfig::default(),
            positive_label: "US".into(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.seeds.is_empty() || !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(PipelineError::InvalidConfig(format!(
                "need at least one seed and a test fraction in (0, 1), got {:?} / {}",
                self.seeds, self.test_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEval {
    pub name: String,
    pub size: usize,
    /// Mean over seeds.
    pub metrics: Metrics,
    pub seed_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub cluster_average: f64,
    pub single_group: f64,
    /// `average/single`, four decimals.
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cuts: [u64; 3],
    pub explicit_cuts: bool,
    pub seeds: Vec<u64>,
    /// Positive label first.
    pub labels: Vec<String>,
    pub clusters: Vec<ClusterEval>,
    pub single_group: ClusterEval,
    /// Unweighted mean of the per-cluster metrics.
    pub cluster_average: Metrics,
    pub comparison: Vec<ComparisonRow>,
}

/// The two classes, positive first.
pub fn binary_labels(labels: &[String], preferred_positive: &str) -> Result<[String; 2], PipelineError> {
    let mut uniq: Vec<&String> = labels.iter().collect();
    uniq.sort();
    uniq.dedup();
    if uniq.len() != 2 {
        return Err(PipelineError::InvalidConfig(format!(
            "binary classification needs exactly 2 labels, found {}",
            uniq.len()
        )));
    }
    if uniq[1] == preferred_positive {
        uniq.swap(0, 1);
    }
    Ok([uniq[0].clone(), uniq[1].clone()])
}

/// Seeded stratified split of `members` (indices into `labels`). Each class
/// contributes `round(fraction·n)` test rows, clamped so that both sides keep
/// at least one row. The generator depends only on `seed`.
pub fn stratified_split(
    labels: &[String],
    members: &[usize],
    fraction: f64,
    seed: u64,
    cluster: &str,
) -> Result<(Vec<usize>, Vec<usize>), PipelineError> {
    let mut classes: Vec<&String> = members.iter().map(|&i| &labels[i]).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(PipelineError::ClusterTooSmall(cluster.to_string()));
    }
    let mut r = rng::stream(seed, &[0x5011]);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in classes {
        let mut idx: Vec<usize> = members.iter().copied().filter(|&i| &labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(PipelineError::ClusterTooSmall(cluster.to_string()));
        }
        idx.shuffle(&mut r);
        let n_test = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn select(row: &[f64], columns: &[usize]) -> Vec<f64> {
    columns.iter().map(|&c| row[c]).collect()
}

/// One split/fit/score pass.
pub fn run_once(
    data: &Dataset,
    members: &[usize],
    columns: &[usize],
    seed: u64,
    cfg: &EvalConfig,
    cluster: &str,
) -> Result<Metrics, PipelineError> {
    let [pos, neg] = binary_labels(&data.labels, &cfg.positive_label)?;
    let (train, test) = stratified_split(&data.labels, members, cfg.test_fraction, seed, cluster)?;
    let x: Vec<Vec<f64>> = train.iter().map(|&i| select(&data.x[i], columns)).collect();
    let y: Vec<bool> = train.iter().map(|&i| data.labels[i] == pos).collect();
    let model = fit_logreg(&x, &y, &LogRegConfig { seed, ..cfg.logreg })?;
    let mut truth = Vec::with_capacity(test.len());
    let mut pred = Vec::with_capacity(test.len());
    for &i in &test {
        truth.push(data.labels[i].clone());
        let p = model.predict(&select(&data.x[i], columns))?;
        pred.push(if p { pos.clone() } else { neg.clone() });
    }
    Ok(compute_metrics(&truth, &pred, &pos)?)
}

/// Runs every seed on one member set and averages.
pub fn evaluate_members(
    data: &Dataset,
    members: &[usize],
    columns: &[usize],
    cfg: &EvalConfig,
    name: &str,
) -> Result<ClusterEval, PipelineError> {
    cfg.validate()?;
    let runs = cfg
        .seeds
        .iter()
        .map(|&s| run_once(data, members, columns, s, cfg, name))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClusterEval {
        name: name.to_string(),
        size: members.len(),
        seed_accuracy: runs.iter().map(|m| m.accuracy).collect(),
        metrics: Metrics::mean(&runs).expect("at least one seed"),
    })
}

pub fn evaluate_clusters(
    data: &Dataset,
    assignment: &ClusterAssignment,
    cfg: &EvalConfig,
) -> Result<EvalReport, PipelineError> {
    cfg.validate()?;
    if assignment.clusters.len() != data.len() {
        return Err(PipelineError::InvalidConfig("cluster assignment does not match the dataset".into()));
    }
    let labels = binary_labels(&data.labels, &cfg.positive_label)?;
    let all_columns: Vec<usize> = (0..data.dim()).collect();
    let present = assignment.present();
    let clusters = crate::par::try_map(&present, |c| {
        evaluate_members(data, &assignment.members(*c), &all_columns, cfg, c.name())
    })?;
    let everyone: Vec<usize> = (0..data.len()).collect();
    let single_group = evaluate_members(data, &everyone, &all_columns, cfg, "Single")?;
    let per_cluster: Vec<Metrics> = clusters.iter().map(|c| c.metrics.clone()).collect();
    let cluster_average = Metrics::mean(&per_cluster).expect("at least one cluster");
    let comparison = [
        ("precision", cluster_average.macro_precision, single_group.metrics.macro_precision),
        ("recall", cluster_average.macro_recall, single_group.metrics.macro_recall),
        ("f1", cluster_average.macro_f1, single_group.metrics.macro_f1),
        ("accuracy", cluster_average.accuracy, single_group.metrics.accuracy),
    ]
    .into_iter()
    .map(|(m, a, s)| ComparisonRow {
        metric: m.to_string(),
        cluster_average: a,
        single_group: s,
        display: format!("{a:.4}/{s:.4}"),
    })
    .collect();
    Ok(EvalReport {
        cuts: assignment.cuts,
        explicit_cuts: assignment.explicit_cuts,
        seeds: cfg.seeds.clone(),
        labels: labels.to_vec(),
        clusters,
        single_group,
        cluster_average,
        comparison,
    })
}

/// A seeded permutation of `labels`, for null-control runs.
pub fn permuted_labels(labels: &[String], seed: u64) -> Vec<String> {
    let mut out = labels.to_vec();
    out.shuffle(&mut rng::stream(seed, &[0x9e11]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let labels: Vec<String> = (0..50).map(|i| if i % 5 == 0 { "CN".into() } else { "US".into() }).collect();
        let members: Vec<usize> = (0..50).collect();
        let (train, test) = stratified_split(&labels, &members, 0.2, 3, "x").unwrap();
        assert_eq!(train.len() + test.len(), 50);
        assert_eq!(test.iter().filter(|&&i| labels[i] == "CN").count(), 2);
        assert_eq!(test.iter().filter(|&&i| labels[i] == "US").count(), 8);
        assert_eq!(stratified_split(&labels, &members, 0.2, 3, "x").unwrap().1, test);
        assert_ne!(stratified_split(&labels, &members, 0.2, 4, "x").unwrap().1, test);
    }

    #[test]
    fn split_needs_two_per_class() {
        let labels = s(&["US", "US", "US", "CN"]);
        assert!(matches!(
            stratified_split(&labels, &[0, 1, 2, 3], 0.2, 1, "Small"),
            Err(PipelineError::ClusterTooSmall(c)) if c == "Small"
        ));
        assert!(stratified_split(&labels, &[0, 1, 2], 0.2, 1, "Small").is_err());
    }

    #[test]
    fn positive_label_order() {
        assert_eq!(binary_labels(&s(&["CN", "US", "CN"]), "US").unwrap(), ["US".to_string(), "CN".to_string()]);
        assert_eq!(binary_labels(&s(&["b", "a"]), "US").unwrap(), ["a".to_string(), "b".to_string()]);
        assert!(binary_labels(&s(&["a", "b", "c"]), "US").is_err());
    }

    #[test]
    fn permutation_keeps_multiset() {
        let l = s(&["a", "b", "b", "c", "c", "c"]);
        let mut p = permuted_labels(&l, 1);
        p.sort();
        assert_eq!(p, l);
    }
}
