use std::io::Write;

use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Positive label first, remaining labels sorted.
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub majority_baseline: f64,
    pub n: usize,
}

impl Metrics {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// Unweighted mean of several metric sets over the same class list.
    /// Supports are summed.
    pub fn mean(all: &[Metrics]) -> Option<Metrics> {
        let first = all.first()?;
        let k = all.len() as f64;
        let avg = |f: &dyn Fn(&Metrics) -> f64| all.iter().map(f).sum::<f64>() / k;
        let classes = first
            .classes
            .iter()
            .map(|c| {
                let of = |m: &Metrics| m.class(&c.label).cloned();
                let get = |f: fn(&ClassMetrics) -> f64| all.iter().map(|m| of(m).map(|c| f(&c)).unwrap_or(0.0)).sum::<f64>() / k;
                ClassMetrics {
                    label: c.label.clone(),
                    precision: get(|c| c.precision),
                    recall: get(|c| c.recall),
                    f1: get(|c| c.f1),
                    support: all.iter().map(|m| of(m).map(|c| c.support).unwrap_or(0)).sum(),
                }
            })
            .collect();
        Some(Metrics {
            classes,
            accuracy: avg(&|m| m.accuracy),
            macro_precision: avg(&|m| m.macro_precision),
            macro_recall: avg(&|m| m.macro_recall),
            macro_f1: avg(&|m| m.macro_f1),
            majority_baseline: avg(&|m| m.majority_baseline),
            n: all.iter().map(|m| m.n).sum(),
        })
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn compute_metrics(y_true: &[String], y_pred: &[String], positive_label: &str) -> Result<Metrics, LearnError> {
    if y_true.len() != y_pred.len() {
        return Err(LearnError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(LearnError::TooFewPoints { needed: 1, found: 0 });
    }
    let mut labels: Vec<&str> = y_true.iter().chain(y_pred).map(String::as_str).collect();
    labels.sort_unstable();
    labels.dedup();
    labels.sort_by_key(|l| *l != positive_label);
    if !labels.contains(&positive_label) {
        labels.insert(0, positive_label);
    }

    let n = y_true.len();
    let mut classes = Vec::with_capacity(labels.len());
    let mut majority = 0;
    for &l in &labels {
        let tp = y_true.iter().zip(y_pred).filter(|(t, p)| *t == l && *p == l).count();
        let actual = y_true.iter().filter(|t| *t == l).count();
        let predicted = y_pred.iter().filter(|p| *p == l).count();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        // 2TP / (2TP + FP + FN), from counts so exact fractions stay exact.
        let f1 = ratio(2 * tp, actual + predicted);
        majority = majority.max(actual);
        classes.push(ClassMetrics {
            label: l.to_string(),
            precision,
            recall,
            f1,
            support: actual,
        });
    }
    let correct = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    let k = classes.len() as f64;
    Ok(Metrics {
        accuracy: ratio(correct, n),
        macro_precision: classes.iter().map(|c| c.precision).sum::<f64>() / k,
        macro_recall: classes.iter().map(|c| c.recall).sum::<f64>() / k,
        macro_f1: classes.iter().map(|c| c.f1).sum::<f64>() / k,
        majority_baseline: ratio(majority, n),
        n,
        classes,
    })
}

/// One row per named metric set: per-class precision, recall and F1 for each
/// of `labels`, then the macro averages, accuracy and majority baseline.
pub fn write_metrics_table<W: Write>(rows: &[(String, Metrics)], labels: &[String], out: W) -> Result<(), LearnError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cluster".to_string()];
    for l in labels {
        for m in ["precision", "recall", "f1"] {
            header.push(format!("{}_{m}", l.to_lowercase()));
        }
    }
    header.extend(
        ["combined_precision", "combined_recall", "combined_f1", "accuracy", "majority"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for (name, m) in rows {
        let mut rec = vec![name.clone()];
        for l in labels {
            let c = m.class(l);
            for v in [
                c.map(|c| c.precision),
                c.map(|c| c.recall),
                c.map(|c| c.f1),
            ] {
                rec.push(format!("{:.6}", v.unwrap_or(0.0)));
            }
        }
        for v in [m.macro_precision, m.macro_recall, m.macro_f1, m.accuracy, m.majority_baseline] {
            rec.push(format!("{v:.6}"));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
