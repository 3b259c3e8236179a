use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_rows, dot, LearnError};
use crate::rng;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;
const PCA_SEED: u64 = 0x5eed_0f_bca;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    /// Eigenvalues of the sample covariance for the two components.
    pub explained_variance: [f64; 2],
    pub total_variance: f64,
    pub coords: Vec<[f64; 2]>,
    /// Covariance rank below 2: the second axis carries no variance.
    pub degenerate: bool,
}

impl PcaProjection {
    pub fn project(&self, x: &[f64]) -> [f64; 2] {
        let c: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        [dot(&c, &self.components[0]), dot(&c, &self.components[1])]
    }

    pub fn back_project(&self, p: [f64; 2]) -> Vec<f64> {
        (0..self.mean.len())
            .map(|j| self.mean[j] + p[0] * self.components[0][j] + p[1] * self.components[1][j])
            .collect()
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Dominant eigenpair of a symmetric PSD matrix.
fn power_iteration(m: &[Vec<f64>], start: Vec<f64>) -> (Vec<f64>, f64) {
    let mut v = start;
    normalize(&mut v);
    for _ in 0..POWER_MAX_ITERS {
        let mut w = matvec(m, &v);
        if normalize(&mut w) == 0.0 {
            return (v, 0.0);
        }
        let diff: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if diff < POWER_TOL {
            break;
        }
    }
    let lambda = dot(&v, &matvec(m, &v));
    (v, lambda)
}

/// A unit vector orthogonal to `u`, from the first basis vector that is not
/// nearly parallel to it.
fn orthogonal_unit(u: &[f64]) -> Vec<f64> {
    let d = u.len();
    let j = (0..d)
        .min_by(|a, b| u[*a].abs().total_cmp(&u[*b].abs()))
        .unwrap_or(0);
    let mut e = vec![0.0; d];
    e[j] = 1.0;
    let p = dot(&e, u);
    e.iter_mut().zip(u).for_each(|(x, ui)| *x -= p * ui);
    normalize(&mut e);
    e
}

/// Top-2 principal components via power iteration with deflation on the
/// sample covariance. Rank-deficient data yields a flagged projection with a
/// zero second coordinate rather than an error.
pub fn pca_2d(x: &[Vec<f64>]) -> Result<PcaProjection, LearnError> {
    let d = check_rows(x)?;
    if x.len() < 3 {
        return Err(LearnError::TooFewPoints {
            needed: 3,
            found: x.len(),
        });
    }
    if d < 2 {
        return Err(LearnError::DimensionMismatch { expected: 2, found: d });
    }
    let n = x.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let centered: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= n - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    let total_variance: f64 = (0..d).map(|i| cov[i][i]).sum();
    let mut r = rng::stream(PCA_SEED, &[d as u64]);
    let start = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| r.gen_range(-1.0..1.0)).collect() };

    let (mut c1, l1) = power_iteration(&cov, start(&mut r));
    let scale_tol = 1e-12 * total_variance.max(f64::MIN_POSITIVE);
    if l1 <= scale_tol {
        c1 = vec![0.0; d];
        c1[0] = 1.0;
    }
    let mut deflated = cov.clone();
    for i in 0..d {
        for j in 0..d {
            deflated[i][j] -= l1 * c1[i] * c1[j];
        }
    }
    let (mut c2, mut l2) = power_iteration(&deflated, start(&mut r));
    // Re-orthogonalize against c1 to clean up deflation error.
    let p = dot(&c2, &c1);
    c2.iter_mut().zip(&c1).for_each(|(a, b)| *a -= p * b);
    let degenerate = l2 <= scale_tol || normalize(&mut c2) < 1e-6;
    if degenerate {
        log::warn!("covariance rank below 2; second PCA axis is zero");
        c2 = orthogonal_unit(&c1);
        l2 = 0.0;
    } else {
        l2 = dot(&c2, &matvec(&cov, &c2));
    }
    let coords = centered
        .iter()
        .map(|row| [dot(row, &c1), if degenerate { 0.0 } else { dot(row, &c2) }])
        .collect();
    Ok(PcaProjection {
        mean,
        components: [c1, c2],
        explained_variance: [l1.max(0.0), l2],
        total_variance,
        coords,
        degenerate,
    })
}
