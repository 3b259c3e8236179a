use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{matvec_add, matvec_t_add, outer_add, sigmoid, LstmParams, StepCache};
use super::SeqError;
use crate::event::EventType;

/// Width of the one-hot event encoding.
pub const EVENT_DIM: usize = EventType::COUNT;

/// Uniform init range for all weights.
pub const INIT_SCALE: f64 = 0.08;

pub fn one_hot(e: EventType) -> [f64; EVENT_DIM] {
    let mut v = [0.0; EVENT_DIM];
    v[e.index()] = 1.0;
    v
}

/// Shape hyperparameters stored alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub latent_dim: usize,
    pub hidden_size: usize,
    pub max_seq_len: usize,
    pub include_watch: bool,
}

/// Encoder-to-latent affine maps for μ and log σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentHead {
    /// `k × H`.
    pub w_mu: Vec<f64>,
    pub b_mu: Vec<f64>,
    /// `k × H`.
    pub w_sigma: Vec<f64>,
    pub b_sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    /// `H × k`, maps z to the initial hidden state.
    pub w_z: Vec<f64>,
    pub b_z: Vec<f64>,
    pub lstm: LstmParams,
    /// `14 × H`.
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

/// All learnable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VraeParams {
    pub encoder: LstmParams,
    pub head: LatentHead,
    pub decoder: DecoderParams,
}

impl VraeParams {
    pub fn zeros(hidden: usize, latent: usize) -> Self {
        VraeParams {
            encoder: LstmParams::zeros(EVENT_DIM, hidden),
            head: LatentHead {
                w_mu: vec![0.0; latent * hidden],
                b_mu: vec![0.0; latent],
                w_sigma: vec![0.0; latent * hidden],
                b_sigma: vec![0.0; latent],
            },
            decoder: DecoderParams {
                w_z: vec![0.0; hidden * latent],
                b_z: vec![0.0; hidden],
                lstm: LstmParams::zeros(EVENT_DIM, hidden),
                w_out: vec![0.0; EVENT_DIM * hidden],
                b_out: vec![0.0; EVENT_DIM],
            },
        }
    }

    pub fn random<R: Rng>(hidden: usize, latent: usize, rng: &mut R) -> Self {
        let encoder = LstmParams::random(EVENT_DIM, hidden, INIT_SCALE, rng);
        let decoder_lstm = LstmParams::random(EVENT_DIM, hidden, INIT_SCALE, rng);
        let mut p = VraeParams::zeros(hidden, latent);
        p.encoder = encoder;
        p.decoder.lstm = decoder_lstm;
        let VraeParams { head, decoder, .. } = &mut p;
        for w in head
            .w_mu
            .iter_mut()
            .chain(head.b_mu.iter_mut())
            .chain(head.w_sigma.iter_mut())
            .chain(head.b_sigma.iter_mut())
            .chain(decoder.w_z.iter_mut())
            .chain(decoder.b_z.iter_mut())
            .chain(decoder.w_out.iter_mut())
            .chain(decoder.b_out.iter_mut())
        {
            *w = rng.gen_range(-INIT_SCALE..INIT_SCALE);
        }
        p
    }

    /// Tensors in their fixed serialization order, with names and shapes.
    pub fn tensors(&self) -> Vec<(&'static str, [usize; 2], &Vec<f64>)> {
        let h = self.encoder.hidden_size;
        let k = self.head.b_mu.len();
        let d = &self.decoder;
        vec![
            ("encoder.w_x", [4 * h, EVENT_DIM], &self.encoder.w_x),
            ("encoder.w_h", [4 * h, h], &self.encoder.w_h),
            ("encoder.b", [4 * h, 1], &self.encoder.b),
            ("head.w_mu", [k, h], &self.head.w_mu),
            ("head.b_mu", [k, 1], &self.head.b_mu),
            ("head.w_sigma", [k, h], &self.head.w_sigma),
            ("head.b_sigma", [k, 1], &self.head.b_sigma),
            ("decoder.w_z", [h, k], &d.w_z),
            ("decoder.b_z", [h, 1], &d.b_z),
            ("decoder.lstm.w_x", [4 * h, EVENT_DIM], &d.lstm.w_x),
            ("decoder.lstm.w_h", [4 * h, h], &d.lstm.w_h),
            ("decoder.lstm.b", [4 * h, 1], &d.lstm.b),
            ("decoder.w_out", [EVENT_DIM, h], &d.w_out),
            ("decoder.b_out", [EVENT_DIM, 1], &d.b_out),
        ]
    }

    /// Mutable tensors, same order as [`VraeParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let d = &mut self.decoder;
        vec![
            &mut self.encoder.w_x,
            &mut self.encoder.w_h,
            &mut self.encoder.b,
            &mut self.head.w_mu,
            &mut self.head.b_mu,
            &mut self.head.w_sigma,
            &mut self.head.b_sigma,
            &mut d.w_z,
            &mut d.b_z,
            &mut d.lstm.w_x,
            &mut d.lstm.w_h,
            &mut d.lstm.b,
            &mut d.w_out,
            &mut d.b_out,
        ]
    }

    pub fn shapes_match(&self, other: &VraeParams) -> bool {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .all(|(a, b)| a.1 == b.1 && a.2.len() == b.2.len())
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &VraeParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b.2) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.2.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.2.iter().all(|x| x.is_finite()))
    }
}

/// Recurrent variational autoencoder over event-type sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VraeModel {
    pub shape: ModelShape,
    pub params: VraeParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub h_n: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Closed-form `KL(N(μ, σ²) ‖ N(0, I))` for a diagonal Gaussian.
pub fn gaussian_kl(mu: &[f64], log_sigma: &[f64]) -> f64 {
    mu.iter()
        .zip(log_sigma)
        .map(|(m, ls)| 0.5 * (m * m + (2.0 * ls).exp() - 1.0 - 2.0 * ls))
        .sum()
}

/// `z = μ + exp(log σ) ⊙ ε`.
pub fn sample_latent(mu: &[f64], log_sigma: &[f64], epsilon: &[f64]) -> Result<Vec<f64>, SeqError> {
    if mu.len() != log_sigma.len() || mu.len() != epsilon.len() {
        return Err(SeqError::ShapeMismatch(format!(
            "sample_latent: mu {} log_sigma {} epsilon {}",
            mu.len(),
            log_sigma.len(),
            epsilon.len()
        )));
    }
    Ok(mu
        .iter()
        .zip(log_sigma)
        .zip(epsilon)
        .map(|((m, ls), e)| m + ls.exp() * e)
        .collect())
}

/// Drops Watch events unless asked to keep them, then subsamples with a
/// uniform stride down to `max_len`.
pub fn preprocess(seq: &[EventType], include_watch: bool, max_len: usize) -> Vec<EventType> {
    let kept: Vec<EventType> = seq
        .iter()
        .copied()
        .filter(|t| include_watch || t.is_development())
        .collect();
    if kept.len() <= max_len {
        return kept;
    }
    let n = kept.len();
    (0..max_len).map(|i| kept[i * n / max_len]).collect()
}

struct ForwardTrace {
    enc_caches: Vec<StepCache>,
    enc: Encoded,
    z: Vec<f64>,
    h0: Vec<f64>,
    dec_caches: Vec<StepCache>,
    dec_h: Vec<Vec<f64>>,
    outputs: Vec<[f64; EVENT_DIM]>,
}

impl VraeModel {
    pub fn zeros(latent_dim: usize, hidden_size: usize, max_seq_len: usize) -> Self {
        VraeModel {
            shape: ModelShape {
                latent_dim,
                hidden_size,
                max_seq_len,
                include_watch: false,
            },
            params: VraeParams::zeros(hidden_size, latent_dim),
        }
    }

    pub fn random<R: Rng>(shape: ModelShape, rng: &mut R) -> Self {
        VraeModel {
            shape,
            params: VraeParams::random(shape.hidden_size, shape.latent_dim, rng),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.shape.latent_dim
    }

    fn check_seq(&self, seq: &[EventType]) -> Result<(), SeqError> {
        if seq.is_empty() {
            return Err(SeqError::EmptySequence);
        }
        if seq.len() > self.shape.max_seq_len {
            return Err(SeqError::SequenceTooLong {
                len: seq.len(),
                max: self.shape.max_seq_len,
            });
        }
        Ok(())
    }

    fn encode_traced(&self, seq: &[EventType]) -> Result<(Encoded, Vec<StepCache>), SeqError> {
        self.check_seq(seq)?;
        let hs = self.shape.hidden_size;
        let k = self.shape.latent_dim;
        let enc = &self.params.encoder;
        let mut h = vec![0.0; hs];
        let mut c = vec![0.0; hs];
        let mut caches = Vec::with_capacity(seq.len());
        for e in seq {
            let (h1, c1, cache) = enc.forward(&h, &c, &one_hot(*e));
            h = h1;
            c = c1;
            caches.push(cache);
        }
        let head = &self.params.head;
        let mut mu = head.b_mu.clone();
        matvec_add(&head.w_mu, &h, &mut mu);
        let mut log_sigma = head.b_sigma.clone();
        matvec_add(&head.w_sigma, &h, &mut log_sigma);
        debug_assert_eq!(mu.len(), k);
        Ok((
            Encoded {
                mu,
                log_sigma,
                h_n: h,
            },
            caches,
        ))
    }

    /// Runs the encoder from a zero state and applies the latent head.
    pub fn encode(&self, seq: &[EventType]) -> Result<Encoded, SeqError> {
        self.encode_traced(seq).map(|(e, _)| e)
    }

    fn decode_traced(&self, z: &[f64], length: usize) -> (Vec<f64>, Vec<StepCache>, Vec<Vec<f64>>, Vec<[f64; EVENT_DIM]>) {
        let hs = self.shape.hidden_size;
        let d = &self.params.decoder;
        let mut h0 = d.b_z.clone();
        matvec_add(&d.w_z, z, &mut h0);
        for v in &mut h0 {
            *v = v.tanh();
        }
        let zeros = [0.0; EVENT_DIM];
        let mut h = h0.clone();
        let mut c = vec![0.0; hs];
        let mut caches = Vec::with_capacity(length);
        let mut hs_out = Vec::with_capacity(length);
        let mut outputs = Vec::with_capacity(length);
        for _ in 0..length {
            let (h1, c1, cache) = d.lstm.forward(&h, &c, &zeros);
            let mut y = [0.0; EVENT_DIM];
            y.copy_from_slice(&d.b_out);
            matvec_add(&d.w_out, &h1, &mut y);
            for v in &mut y {
                *v = sigmoid(*v);
            }
            outputs.push(y);
            hs_out.push(h1.clone());
            caches.push(cache);
            h = h1;
            c = c1;
        }
        (h0, caches, hs_out, outputs)
    }

    /// Decodes `length` steps from `z`: `h₀ = tanh(W_z z + b_z)`, zero inputs,
    /// sigmoid outputs.
    pub fn decode(&self, z: &[f64], length: usize) -> Result<Vec<[f64; EVENT_DIM]>, SeqError> {
        if z.len() != self.shape.latent_dim {
            return Err(SeqError::ShapeMismatch(format!(
                "decode: z has {} dims, model expects {}",
                z.len(),
                self.shape.latent_dim
            )));
        }
        if length == 0 {
            return Err(SeqError::EmptySequence);
        }
        Ok(self.decode_traced(z, length).3)
    }

    fn forward(&self, seq: &[EventType], epsilon: &[f64]) -> Result<ForwardTrace, SeqError> {
        let (enc, enc_caches) = self.encode_traced(seq)?;
        let z = sample_latent(&enc.mu, &enc.log_sigma, epsilon)?;
        let (h0, dec_caches, dec_h, outputs) = self.decode_traced(&z, seq.len());
        Ok(ForwardTrace {
            enc_caches,
            enc,
            z,
            h0,
            dec_caches,
            dec_h,
            outputs,
        })
    }

    fn breakdown(trace: &ForwardTrace, seq: &[EventType], kl_weight: f64) -> LossBreakdown {
        let cells = (seq.len() * EVENT_DIM) as f64;
        let recon = seq
            .iter()
            .zip(&trace.outputs)
            .map(|(e, y)| {
                let target = one_hot(*e);
                y.iter()
                    .zip(target)
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / cells;
        let kl = gaussian_kl(&trace.enc.mu, &trace.enc.log_sigma);
        LossBreakdown {
            total: recon + kl_weight * kl,
            recon,
            kl,
        }
    }

    /// Reconstruction MSE plus weighted KL for one sequence and noise draw.
    pub fn loss(&self, seq: &[EventType], epsilon: &[f64], kl_weight: f64) -> Result<LossBreakdown, SeqError> {
        let trace = self.forward(seq, epsilon)?;
        Ok(Self::breakdown(&trace, seq, kl_weight))
    }

    /// Exact gradients of `loss(..).total` with respect to every parameter.
    pub fn backward(
        &self,
        seq: &[EventType],
        epsilon: &[f64],
        kl_weight: f64,
    ) -> Result<(LossBreakdown, VraeParams), SeqError> {
        let trace = self.forward(seq, epsilon)?;
        let loss = Self::breakdown(&trace, seq, kl_weight);
        let hs = self.shape.hidden_size;
        let k = self.shape.latent_dim;
        let p = &self.params;
        let mut g = VraeParams::zeros(hs, k);
        let cells = (seq.len() * EVENT_DIM) as f64;

        // Decoder, newest step first.
        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        for t in (0..seq.len()).rev() {
            let target = one_hot(seq[t]);
            let y = &trace.outputs[t];
            let dpre: Vec<f64> = (0..EVENT_DIM)
                .map(|j| 2.0 * (y[j] - target[j]) / cells * y[j] * (1.0 - y[j]))
                .collect();
            outer_add(&mut g.decoder.w_out, &dpre, &trace.dec_h[t]);
            for (gb, d) in g.decoder.b_out.iter_mut().zip(&dpre) {
                *gb += d;
            }
            let mut dh = dh_next;
            matvec_t_add(&p.decoder.w_out, &dpre, &mut dh);
            let (dhp, dcp) = p
                .decoder
                .lstm
                .backward(&trace.dec_caches[t], &dh, &dc_next, &mut g.decoder.lstm);
            dh_next = dhp;
            dc_next = dcp;
        }
        // h₀ = tanh(W_z z + b_z); the initial cell state is a constant zero.
        let dpre0: Vec<f64> = dh_next
            .iter()
            .zip(&trace.h0)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        outer_add(&mut g.decoder.w_z, &dpre0, &trace.z);
        for (gb, d) in g.decoder.b_z.iter_mut().zip(&dpre0) {
            *gb += d;
        }
        let mut dz = vec![0.0; k];
        matvec_t_add(&p.decoder.w_z, &dpre0, &mut dz);

        // Reparameterization and KL.
        let enc = &trace.enc;
        let mut dmu = vec![0.0; k];
        let mut dls = vec![0.0; k];
        for j in 0..k {
            let sigma = enc.log_sigma[j].exp();
            dmu[j] = dz[j] + kl_weight * enc.mu[j];
            dls[j] = dz[j] * sigma * epsilon[j] + kl_weight * (sigma * sigma - 1.0);
        }
        outer_add(&mut g.head.w_mu, &dmu, &enc.h_n);
        outer_add(&mut g.head.w_sigma, &dls, &enc.h_n);
        for j in 0..k {
            g.head.b_mu[j] += dmu[j];
            g.head.b_sigma[j] += dls[j];
        }
        let mut dh = vec![0.0; hs];
        matvec_t_add(&p.head.w_mu, &dmu, &mut dh);
        matvec_t_add(&p.head.w_sigma, &dls, &mut dh);

        // Encoder.
        let mut dc = vec![0.0; hs];
        for cache in trace.enc_caches.iter().rev() {
            let (dhp, dcp) = p.encoder.backward(cache, &dh, &dc, &mut g.encoder);
            dh = dhp;
            dc = dcp;
        }
        Ok((loss, g))
    }

    /// Noise-free embedding (μ) of an already preprocessed sequence.
    pub fn embed(&self, seq: &[EventType]) -> Result<Vec<f64>, SeqError> {
        self.encode(seq).map(|e| e.mu)
    }

    /// Applies this model's Watch policy and length cap.
    pub fn preprocess(&self, seq: &[EventType]) -> Vec<EventType> {
        preprocess(seq, self.shape.include_watch, self.shape.max_seq_len)
    }
}

impl crate::features::SequenceEmbedder for VraeModel {
    fn latent_dim(&self) -> usize {
        self.shape.latent_dim
    }

    fn embed_sequence(&self, seq: &[EventType]) -> Result<Vec<f64>, crate::features::FeatureError> {
        self.embed(&self.preprocess(seq))
            .map_err(|e| crate::features::FeatureError::Embedding(e.to_string()))
    }
}
