use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::event::{CountryLabel, EventType};

/// Parameters of a lognormal: `exp(N(mu, sigma²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    pub fn median(median: f64, sigma: f64) -> Self {
        LogNormalParams { mu: median.ln(), sigma }
    }

    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    pub label: String,
    /// Stationary event-type mix, in `EventType::ALL` order.
    pub type_dist: Vec<f64>,
    /// Row-stochastic first-order transition matrix over event types.
    pub transition: Vec<Vec<f64>>,
    /// Gap between consecutive events, in days.
    pub iat_days: LogNormalParams,
    pub stars: LogNormalParams,
    pub forks: LogNormalParams,
    pub open_issues: LogNormalParams,
    /// Commit comment length in characters: (mean, std).
    pub comment_len: (f64, f64),
    pub leaders_mean: f64,
    /// Event count per repo; draws are clamped to `[min_events, max_events]`.
    pub repo_size: LogNormalParams,
    pub min_events: usize,
    pub max_events: usize,
    /// Description vocabulary with sampling weights.
    pub vocabulary: Vec<(String, f64)>,
    /// Contributor locations, each resolvable to `label` by the emitted
    /// gazetteer.
    pub locations: Vec<String>,
}

/// `(1 − ρ)·1πᵀ + ρI`: every row mixes a restart from `pi` with staying put,
/// so `pi` is stationary and `rho` sets how sticky runs are.
pub fn sticky_transition(pi: &[f64], rho: f64) -> Vec<Vec<f64>> {
    (0..pi.len())
        .map(|i| {
            (0..pi.len())
                .map(|j| (1.0 - rho) * pi[j] + if i == j { rho } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Stationary distribution by power iteration from uniform.
pub fn stationary_distribution(t: &[Vec<f64>]) -> Vec<f64> {
    let n = t.len();
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += p[i] * t[i][j];
            }
        }
        let diff: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        if diff < 1e-15 {
            break;
        }
    }
    p
}

fn words(ws: &[(&str, f64)]) -> Vec<(String, f64)> {
    ws.iter().map(|(w, x)| (w.to_string(), *x)).collect()
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// The pinned US-like / CN-like fixture pair. US repos push more and write
/// longer commit comments with shorter gaps; CN repos fork and watch more.
pub fn reference_profiles() -> (GroupProfile, GroupProfile) {
    let us_dist = vec![
        0.02, 0.03, 0.415, 0.08, 0.03, 0.17, 0.08, 0.10, 0.04, 0.015, 0.005, 0.005, 0.005, 0.005,
    ];
    let cn_dist = vec![
        0.03, 0.015, 0.345, 0.16, 0.14, 0.07, 0.07, 0.08, 0.02, 0.02, 0.015, 0.01, 0.015, 0.01,
    ];
    let us = GroupProfile {
        label: "US".into(),
        transition: sticky_transition(&us_dist, 0.3),
        type_dist: us_dist,
        iat_days: LogNormalParams::median(0.6, 1.0),
        stars: LogNormalParams::median(40.0, 1.2),
        forks: LogNormalParams::median(8.0, 1.0),
        open_issues: LogNormalParams::median(5.0, 0.8),
        comment_len: (60.0, 20.0),
        leaders_mean: 2.0,
        repo_size: LogNormalParams::median(85.0, 0.6),
        min_events: 50,
        max_events: 2000,
        vocabulary: words(&[
            ("web", 3.0),
            ("framework", 3.0),
            ("api", 3.0),
            ("cloud", 2.0),
            ("server", 2.0),
            ("javascript", 2.0),
            ("library", 2.0),
            ("tool", 1.0),
            ("data", 1.0),
            ("fast", 1.0),
        ]),
        locations: strings(&["San Francisco, CA", "Seattle, WA", "New York", "Austin, TX", "Boston"]),
    };
    let cn = GroupProfile {
        label: "CN".into(),
        transition: sticky_transition(&cn_dist, 0.6),
        type_dist: cn_dist,
        iat_days: LogNormalParams::median(1.5, 1.0),
        stars: LogNormalParams::median(30.0, 1.2),
        forks: LogNormalParams::median(12.0, 1.0),
        open_issues: LogNormalParams::median(4.0, 0.8),
        comment_len: (35.0, 15.0),
        leaders_mean: 1.2,
        repo_size: LogNormalParams::median(80.0, 0.6),
        min_events: 50,
        max_events: 2000,
        vocabulary: words(&[
            ("deep", 3.0),
            ("learning", 3.0),
            ("model", 2.0),
            ("android", 2.0),
            ("mobile", 2.0),
            ("tutorial", 2.0),
            ("spring", 1.0),
            ("vue", 1.0),
            ("data", 1.0),
            ("fast", 1.0),
        ]),
        locations: strings(&["Beijing", "Shanghai", "Hangzhou", "Shenzhen", "Guangzhou"]),
    };
    (us, cn)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn lerp_ln(a: LogNormalParams, b: LogNormalParams, t: f64) -> LogNormalParams {
    LogNormalParams {
        mu: lerp(a.mu, b.mu, t),
        sigma: lerp(a.sigma, b.sigma, t),
    }
}

impl GroupProfile {
    pub fn country(&self) -> Result<CountryLabel, SynthError> {
        CountryLabel::new(&self.label).map_err(|e| SynthError::InvalidProfile(format!("{}: {e}", self.label)))
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidProfile(format!("{}: {m}", self.label)));
        self.country()?;
        let n = EventType::COUNT;
        if self.type_dist.len() != n || self.transition.len() != n {
            return bad(format!("type distribution and transition need {n} entries"));
        }
        let sums_to_one = |v: &[f64]| v.iter().all(|x| *x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if !sums_to_one(&self.type_dist) {
            return bad("type distribution must be non-negative and sum to 1".into());
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != n || !sums_to_one(row) {
                return bad(format!("transition row {i} is not a probability vector"));
            }
        }
        let scales = [
            self.iat_days.sigma,
            self.stars.sigma,
            self.forks.sigma,
            self.open_issues.sigma,
            self.repo_size.sigma,
            self.comment_len.0,
            self.comment_len.1,
            self.leaders_mean,
        ];
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("scale parameters must be positive".into());
        }
        if self.min_events < 2 || self.max_events < self.min_events {
            return bad("event count bounds must satisfy 2 <= min <= max".into());
        }
        if self.vocabulary.is_empty() || self.vocabulary.iter().any(|(_, w)| !(*w > 0.0)) {
            return bad("vocabulary needs positive weights".into());
        }
        if self.locations.is_empty() || self.locations.iter().any(|l| l.trim().is_empty()) {
            return bad("locations must be non-empty".into());
        }
        Ok(())
    }

    /// Moves every distributional parameter a fraction `t` of the way
    /// toward `other`. The label and locations stay.
    pub fn mix_toward(&self, other: &GroupProfile, t: f64) -> GroupProfile {
        let mix_vec = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| lerp(*x, *y, t)).collect() };
        let mut vocab: Vec<(String, f64)> = Vec::new();
        let weight = |v: &[(String, f64)], w: &str| v.iter().find(|(x, _)| x == w).map(|p| p.1).unwrap_or(0.0);
        for (w, _) in self.vocabulary.iter().chain(&other.vocabulary) {
            if !vocab.iter().any(|(x, _)| x == w) {
                let mixed = lerp(weight(&self.vocabulary, w), weight(&other.vocabulary, w), t);
                if mixed > 0.0 {
                    vocab.push((w.clone(), mixed));
                }
            }
        }
        GroupProfile {
            label: self.label.clone(),
            type_dist: mix_vec(&self.type_dist, &other.type_dist),
            transition: self
                .transition
                .iter()
                .zip(&other.transition)
                .map(|(a, b)| mix_vec(a, b))
                .collect(),
            iat_days: lerp_ln(self.iat_days, other.iat_days, t),
            stars: lerp_ln(self.stars, other.stars, t),
            forks: lerp_ln(self.forks, other.forks, t),
            open_issues: lerp_ln(self.open_issues, other.open_issues, t),
            comment_len: (
                lerp(self.comment_len.0, other.comment_len.0, t),
                lerp(self.comment_len.1, other.comment_len.1, t),
            ),
            leaders_mean: lerp(self.leaders_mean, other.leaders_mean, t),
            repo_size: lerp_ln(self.repo_size, other.repo_size, t),
            min_events: self.min_events,
            max_events: self.max_events,
            vocabulary: vocab,
            locations: self.locations.clone(),
        }
    }
}

/// Both profiles moved `lambda / 2` toward each other; at `lambda = 1` they
/// share every distribution and differ only in label and locations.
pub fn interpolate_pair(a: &GroupProfile, b: &GroupProfile, lambda: f64) -> (GroupProfile, GroupProfile) {
    (a.mix_toward(b, lambda / 2.0), b.mix_toward(a, lambda / 2.0))
}
