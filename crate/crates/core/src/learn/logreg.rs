use serde::{Deserialize, Serialize};

use super::{check_rows, dot, LearnError, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_lambda: f64,
    /// Recorded for reproducibility keys; training starts from zero weights
    /// and is deterministic without it.
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            learning_rate: 0.1,
            epochs: 500,
            l2_lambda: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardizer: Standardizer,
    pub l2_lambda: f64,
    #[serde(default)]
    pub feature_names: Vec<String>,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn penalized_loss(z: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = z.len() as f64;
    let data: f64 = z
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let t = dot(w, row) + b;
            if yi {
                softplus(-t)
            } else {
                softplus(t)
            }
        })
        .sum::<f64>()
        / n;
    data + 0.5 * lambda * dot(w, w)
}

/// Full-batch gradient descent on mean log loss plus `λ/2 ‖w‖²` (bias not
/// penalized), on features standardized with training statistics. Returns
/// the model and the penalized loss before each epoch and after the last.
pub fn fit_logreg_with_history(
    x: &[Vec<f64>],
    y: &[bool],
    cfg: &LogRegConfig,
) -> Result<(LogRegModel, Vec<f64>), LearnError> {
    if x.len() != y.len() {
        return Err(LearnError::LengthMismatch(x.len(), y.len()));
    }
    let d = check_rows(x)?;
    if x.len() < 2 || y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(LearnError::SingleClassTraining);
    }
    if !(cfg.learning_rate > 0.0 && cfg.l2_lambda >= 0.0) {
        return Err(LearnError::InvalidConfig(format!("{cfg:?}")));
    }
    let standardizer = Standardizer::fit(x)?;
    let z = standardizer.transform_all(x)?;
    let n = z.len() as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let mut gw = vec![0.0; d];
    for _ in 0..cfg.epochs {
        history.push(penalized_loss(&z, y, &w, b, cfg.l2_lambda));
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (row, &yi) in z.iter().zip(y) {
            let r = sigmoid(dot(&w, row) + b) - if yi { 1.0 } else { 0.0 };
            for (g, xj) in gw.iter_mut().zip(row) {
                *g += r * xj;
            }
            gb += r;
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= cfg.learning_rate * (g / n + cfg.l2_lambda * *wj);
        }
        b -= cfg.learning_rate * gb / n;
    }
    history.push(penalized_loss(&z, y, &w, b, cfg.l2_lambda));
    let model = LogRegModel {
        weights: w,
        bias: b,
        standardizer,
        l2_lambda: cfg.l2_lambda,
        feature_names: Vec::new(),
    };
    Ok((model, history))
}

pub fn fit_logreg(x: &[Vec<f64>], y: &[bool], cfg: &LogRegConfig) -> Result<LogRegModel, LearnError> {
    fit_logreg_with_history(x, y, cfg).map(|(m, _)| m)
}

impl LogRegModel {
    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = names;
        self
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64, LearnError> {
        let z = self.standardizer.transform(x)?;
        Ok(dot(&self.weights, &z) + self.bias)
    }

    /// Probability of the positive class.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        self.logit(x).map(sigmoid)
    }

    /// Positive when the probability is at least 0.5.
    pub fn predict(&self, x: &[f64]) -> Result<bool, LearnError> {
        self.predict_proba(x).map(|p| p >= 0.5)
    }

    pub fn to_json(&self) -> Result<String, LearnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, LearnError> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 0;
            let c = if pos { 3.0 } else { -3.0 };
            x.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
            y.push(pos);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs(200, 1);
        let m = fit_logreg(&x, &y, &LogRegConfig::default()).unwrap();
        let correct = x.iter().zip(&y).filter(|(r, &l)| m.predict(r).unwrap() == l).count();
        assert_eq!(correct, 200);
    }

    #[test]
    fn zero_epochs_gives_half() {
        let (x, y) = blobs(20, 2);
        let cfg = LogRegConfig {
            epochs: 0,
            ..Default::default()
        };
        let m = fit_logreg(&x, &y, &cfg).unwrap();
        assert!(m.weights.iter().all(|w| *w == 0.0));
        for r in &x {
            assert_eq!(m.predict_proba(r).unwrap(), 0.5);
            assert!(m.predict(r).unwrap());
        }
    }

    #[test]
    fn duplicated_rows_leave_boundary_unchanged() {
        let (x, y) = blobs(60, 3);
        let mut x2 = x.clone();
        x2.extend(x.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(y.iter().cloned());
        let cfg = LogRegConfig::default();
        let a = fit_logreg(&x, &y, &cfg).unwrap();
        let b = fit_logreg(&x2, &y2, &cfg).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa - wb).abs() < 1e-9);
        }
        assert!((a.bias - b.bias).abs() < 1e-9);
    }

    #[test]
    fn saturation_and_symmetry() {
        let s = Standardizer {
            mean: vec![0.0],
            std: vec![1.0],
        };
        let mut m = LogRegModel {
            weights: vec![0.0],
            bias: 50.0,
            standardizer: s,
            l2_lambda: 0.0,
            feature_names: vec![],
        };
        assert!(m.predict_proba(&[0.0]).unwrap() > 0.999);
        m.weights = vec![0.7];
        m.bias = -0.2;
        let p = m.predict_proba(&[1.3]).unwrap();
        let mut neg = m.clone();
        neg.weights = vec![-0.7];
        neg.bias = 0.2;
        assert!((p + neg.predict_proba(&[1.3]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            m.predict_proba(&[1.0, 2.0]),
            Err(LearnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn loss_is_non_increasing_at_small_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..5).map(|_| noise.sample(&mut rng)).collect())
            .collect();
        let y: Vec<bool> = x.iter().map(|r| r[0] + 0.5 * noise.sample(&mut rng) > 0.0).collect();
        let cfg = LogRegConfig {
            learning_rate: 1e-3,
            epochs: 300,
            ..Default::default()
        };
        let (_, hist) = fit_logreg_with_history(&x, &y, &cfg).unwrap();
        assert_eq!(hist.len(), 301);
        for w in hist.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            fit_logreg(&x, &[true, true], &LogRegConfig::default()),
            Err(LearnError::SingleClassTraining)
        ));
        assert!(matches!(
            fit_logreg(&[vec![1.0], vec![2.0, 3.0]], &[true, false], &LogRegConfig::default()),
            Err(LearnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = blobs(30, 5);
        let m = fit_logreg(&x, &y, &LogRegConfig::default())
            .unwrap()
            .with_feature_names(vec!["a".into(), "b".into()]);
        let back = LogRegModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
