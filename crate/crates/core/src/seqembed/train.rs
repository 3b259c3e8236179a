use std::io::Write;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{preprocess, LossBreakdown, ModelShape, VraeModel, VraeParams};
use super::SeqError;
use crate::event::EventType;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub hidden_size: usize,
    pub max_seq_len: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of epochs over which the KL weight ramps linearly from 0 to 1.
    pub kl_warmup_fraction: f64,
    pub seed: u64,
    pub include_watch: bool,
    /// Global gradient-norm clip per batch.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            latent_dim: 8,
            hidden_size: 32,
            max_seq_len: 500,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 50,
            batch_size: 8,
            kl_warmup_fraction: 0.2,
            seed: 0,
            include_watch: false,
            grad_clip: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SeqError> {
        let positive = self.latent_dim > 0
            && self.hidden_size > 0
            && self.max_seq_len > 0
            && self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && self.adam_eps > 0.0;
        let betas = (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2);
        let warmup = (0.0..=1.0).contains(&self.kl_warmup_fraction);
        if positive && betas && warmup {
            Ok(())
        } else {
            Err(SeqError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            latent_dim: self.latent_dim,
            hidden_size: self.hidden_size,
            max_seq_len: self.max_seq_len,
            include_watch: self.include_watch,
        }
    }

    /// KL weight for a 0-based epoch: linear from 0 over the warm-up epochs,
    /// then 1.
    pub fn kl_weight(&self, epoch: usize) -> f64 {
        let warm = (self.kl_warmup_fraction * self.epochs as f64).ceil() as usize;
        if warm == 0 {
            1.0
        } else {
            (epoch as f64 / warm as f64).min(1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    /// 1-based.
    pub epoch: usize,
    pub mean_total: f64,
    pub mean_recon: f64,
    pub mean_kl: f64,
}

/// Adam with bias correction over the flattened parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: VraeParams,
    v: VraeParams,
}

impl Adam {
    pub fn new(like: &VraeParams, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let mut zero = like.clone();
        zero.scale(0.0);
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: zero.clone(),
            v: zero,
        }
    }

    pub fn step(&mut self, params: &mut VraeParams, grads: &VraeParams) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let grads = grads.tensors();
        for (((p, m), v), g) in params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(grads)
        {
            for i in 0..p.len() {
                let gi = g.2[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                p[i] -= self.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
            }
        }
    }
}

/// Standard normal noise for one (epoch, sequence) pair.
pub fn epsilon_for(seed: u64, epoch: usize, seq_index: usize, dim: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, &[1, epoch as u64, seq_index as u64]);
    (0..dim).map(|_| StandardNormal.sample(&mut r)).collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: VraeModel,
    pub curve: Vec<EpochLoss>,
}

/// Mini-batch Adam training. Per-sequence gradients inside a batch may be
/// computed in parallel; they are summed in batch order.
pub fn train(cfg: &TrainConfig, sequences: &[(String, Vec<EventType>)]) -> Result<TrainOutcome, SeqError> {
    cfg.validate()?;
    let data: Vec<Vec<EventType>> = sequences
        .iter()
        .map(|(_, s)| preprocess(s, cfg.include_watch, cfg.max_seq_len))
        .filter(|s| !s.is_empty())
        .collect();
    if data.is_empty() {
        return Err(SeqError::EmptyTrainingSet);
    }
    let mut init_rng = rng::stream(cfg.seed, &[0]);
    let mut model = VraeModel::random(cfg.shape(), &mut init_rng);
    let mut adam = Adam::new(&model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let kl_weight = cfg.kl_weight(epoch);
        order.shuffle(&mut rng::stream(cfg.seed, &[2, epoch as u64]));
        let mut sum = LossBreakdown {
            total: 0.0,
            recon: 0.0,
            kl: 0.0,
        };
        for batch in order.chunks(cfg.batch_size) {
            let results = crate::par::try_map(batch, |&i| {
                let eps = epsilon_for(cfg.seed, epoch, i, cfg.latent_dim);
                model.backward(&data[i], &eps, kl_weight)
            })?;
            let mut grads = VraeParams::zeros(cfg.hidden_size, cfg.latent_dim);
            for (loss, g) in &results {
                sum.total += loss.total;
                sum.recon += loss.recon;
                sum.kl += loss.kl;
                grads.add_assign(g);
            }
            grads.scale(1.0 / batch.len() as f64);
            if let Some(clip) = cfg.grad_clip {
                let norm = grads.l2_norm();
                if norm > clip {
                    grads.scale(clip / norm);
                }
            }
            adam.step(&mut model.params, &grads);
        }
        let n = data.len() as f64;
        let row = EpochLoss {
            epoch: epoch + 1,
            mean_total: sum.total / n,
            mean_recon: sum.recon / n,
            mean_kl: sum.kl / n,
        };
        log::info!(
            "epoch {} total {:.6} recon {:.6} kl {:.6}",
            row.epoch,
            row.mean_total,
            row.mean_recon,
            row.mean_kl
        );
        curve.push(row);
    }
    Ok(TrainOutcome { model, curve })
}

/// Writes `epoch,mean_total,mean_recon,mean_kl`.
pub fn write_train_log<W: Write>(curve: &[EpochLoss], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "mean_total", "mean_recon", "mean_kl"])?;
    for r in curve {
        w.write_record([
            r.epoch.to_string(),
            format!("{}", r.mean_total),
            format!("{}", r.mean_recon),
            format!("{}", r.mean_kl),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use EventType::*;

    #[test]
    fn kl_schedule() {
        let cfg = TrainConfig {
            epochs: 50,
            ..Default::default()
        };
        assert_eq!(cfg.kl_weight(0), 0.0);
        assert_eq!(cfg.kl_weight(5), 0.5);
        assert_eq!(cfg.kl_weight(10), 1.0);
        assert_eq!(cfg.kl_weight(49), 1.0);
        let none = TrainConfig {
            kl_warmup_fraction: 0.0,
            ..cfg
        };
        assert_eq!(none.kl_weight(0), 1.0);
    }

    #[test]
    fn empty_training_set() {
        let cfg = TrainConfig::default();
        assert!(matches!(train(&cfg, &[]), Err(SeqError::EmptyTrainingSet)));
        let only_watch = vec![("r".to_string(), vec![Watch, Watch])];
        assert!(matches!(train(&cfg, &only_watch), Err(SeqError::EmptyTrainingSet)));
        let bad = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(matches!(train(&bad, &only_watch), Err(SeqError::InvalidConfig(_))));
    }

    #[test]
    fn small_run_is_deterministic_and_finite() {
        let cfg = TrainConfig {
            latent_dim: 3,
            hidden_size: 6,
            epochs: 4,
            batch_size: 2,
            seed: 5,
            ..Default::default()
        };
        let seqs: Vec<(String, Vec<EventType>)> = (0..6)
            .map(|i| {
                let s = (0..10 + i).map(|j| EventType::ALL[(i * j) % 14]).collect();
                (format!("r{i}"), s)
            })
            .collect();
        let a = train(&cfg, &seqs).unwrap();
        let b = train(&cfg, &seqs).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.model, b.model);
        assert!(a.model.params.is_finite());
        let mut buf = Vec::new();
        write_train_log(&a.curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,mean_total,mean_recon,mean_kl\n1,"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn repeated_sequence_is_memorized() {
        let seq = vec![Create, Push, Push, Issues, IssueComment, Push, Fork, Push];
        let cfg = TrainConfig {
            latent_dim: 2,
            hidden_size: 16,
            epochs: 2000,
            batch_size: 1,
            learning_rate: 1e-2,
            seed: 3,
            ..Default::default()
        };
        let out = train(&cfg, &[("r".into(), seq.clone())]).unwrap();
        let last = out.curve.last().unwrap();
        let late = &out.curve[out.curve.len() - 50];
        assert!(last.mean_recon < 0.01, "recon {}", last.mean_recon);
        assert!((late.mean_recon - last.mean_recon).abs() < 0.01);
        let mu = out.model.embed(&seq).unwrap();
        let decoded = out.model.decode(&mu, seq.len()).unwrap();
        for (t, row) in decoded.iter().enumerate() {
            let argmax = (0..14).max_by(|a, b| row[*a].total_cmp(&row[*b])).unwrap();
            assert_eq!(argmax, seq[t].index(), "step {t}");
        }
    }
}
