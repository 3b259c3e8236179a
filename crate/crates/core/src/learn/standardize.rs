use serde::{Deserialize, Serialize};

use super::{check_rows, LearnError};

/// Per-column z-scoring with population statistics. A column that is
/// constant in the fitting data gets mean = that value and std = 1, so it
/// standardizes to exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self, LearnError> {
        let d = check_rows(x)?;
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        let mut std = vec![1.0; d];
        for j in 0..d {
            let first = x[0][j];
            if x.iter().all(|r| r[j] == first) {
                mean[j] = first;
                continue;
            }
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            if var > 0.0 {
                std[j] = var.sqrt();
            }
        }
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>, LearnError> {
        if row.len() != self.dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.dim(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn transform_all(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LearnError> {
        x.iter().map(|r| self.transform(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_column_maps_to_zero() {
        let x = vec![vec![1.0, 0.1], vec![2.0, 0.1], vec![4.0, 0.1]];
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.std[1], 1.0);
        for r in s.transform_all(&x).unwrap() {
            assert_eq!(r[1], 0.0);
        }
        assert!(s.transform(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn training_columns_are_unit_scaled(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 2..40)) {
            let s = Standardizer::fit(&rows).unwrap();
            let z = s.transform_all(&rows).unwrap();
            let n = z.len() as f64;
            for j in 0..3 {
                let constant = rows.iter().all(|r| r[j] == rows[0][j]);
                let m = z.iter().map(|r| r[j]).sum::<f64>() / n;
                let v = z.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
                prop_assert!(m.abs() < 1e-9);
                if constant {
                    prop_assert_eq!(v, 0.0);
                } else {
                    prop_assert!((v.sqrt() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
