use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClusterId {
    Small,
    Medium,
    MediumLarge,
    Large,
}

impl ClusterId {
    pub const ALL: [ClusterId; 4] = [
        ClusterId::Small,
        ClusterId::Medium,
        ClusterId::MediumLarge,
        ClusterId::Large,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClusterId::Small => "Small",
            ClusterId::Medium => "Medium",
            ClusterId::MediumLarge => "MediumLarge",
            ClusterId::Large => "Large",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub cuts: [u64; 3],
    /// True when the cuts were supplied rather than computed.
    pub explicit_cuts: bool,
    /// Cluster of each input record, in input order.
    pub clusters: Vec<ClusterId>,
}

impl ClusterAssignment {
    pub fn members(&self, c: ClusterId) -> Vec<usize> {
        (0..self.clusters.len()).filter(|i| self.clusters[*i] == c).collect()
    }

    pub fn sizes(&self) -> [usize; 4] {
        let mut s = [0; 4];
        for c in &self.clusters {
            s[*c as usize] += 1;
        }
        s
    }

    /// Clusters with at least one member, in size order.
    pub fn present(&self) -> Vec<ClusterId> {
        let sizes = self.sizes();
        ClusterId::ALL.into_iter().filter(|c| sizes[*c as usize] > 0).collect()
    }
}

/// Nearest-rank percentile of ascending data: the value at rank ⌈p·n/100⌉.
pub fn nearest_rank(sorted: &[u64], p: f64) -> u64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn assign(counts: &[u64], cuts: [u64; 3], explicit: bool) -> ClusterAssignment {
    let clusters = counts
        .iter()
        .map(|&c| {
            if c < cuts[0] {
                ClusterId::Small
            } else if c < cuts[1] {
                ClusterId::Medium
            } else if c < cuts[2] {
                ClusterId::MediumLarge
            } else {
                ClusterId::Large
            }
        })
        .collect();
    ClusterAssignment {
        cuts,
        explicit_cuts: explicit,
        clusters,
    }
}

/// Splits records by activity count at the 25th, 50th and 75th percentiles.
pub fn quartile_clusters(counts: &[u64]) -> Result<ClusterAssignment, PipelineError> {
    if counts.len() < 4 {
        return Err(PipelineError::TooFewRepos(counts.len()));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let cuts = [
        nearest_rank(&sorted, 25.0),
        nearest_rank(&sorted, 50.0),
        nearest_rank(&sorted, 75.0),
    ];
    Ok(assign(counts, cuts, false))
}

pub fn clusters_with_cuts(counts: &[u64], cuts: [u64; 3]) -> Result<ClusterAssignment, PipelineError> {
    if counts.is_empty() {
        return Err(PipelineError::TooFewRepos(0));
    }
    if cuts[0] > cuts[1] || cuts[1] > cuts[2] {
        return Err(PipelineError::InvalidConfig(format!("cut points {cuts:?} must be non-decreasing")));
    }
    Ok(assign(counts, cuts, true))
}
