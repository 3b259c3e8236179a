//! Single-layer LSTM cell with an explicit backward pass.
//!
//! Gates are stacked in the order input, forget, cell candidate, output:
//! rows `[0, H)` of every weight matrix belong to the input gate, `[H, 2H)`
//! to the forget gate and so on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SeqError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `4H × I`, row-major.
    pub w_x: Vec<f64>,
    /// `4H × H`, row-major.
    pub w_h: Vec<f64>,
    /// `4H`.
    pub b: Vec<f64>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += W x` for row-major `W` of shape `rows × x.len()`.
pub(crate) fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ y` for row-major `W` of shape `y.len() × out.len()`.
pub(crate) fn matvec_t_add(w: &[f64], y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, yr) in y.iter().enumerate() {
        if *yr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yr;
        }
    }
}

/// `g += y xᵀ`.
pub(crate) fn outer_add(g: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, yr) in y.iter().enumerate() {
        if *yr == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gi, xi) in row.iter_mut().zip(x) {
            *gi += yr * xi;
        }
    }
}

/// Values saved by the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`, length 4H.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmParams {
            input_size,
            hidden_size,
            w_x: vec![0.0; 4 * hidden_size * input_size],
            w_h: vec![0.0; 4 * hidden_size * hidden_size],
            b: vec![0.0; 4 * hidden_size],
        }
    }

    /// Uniform(−scale, scale) weights; forget-gate bias set to +1.
    pub fn random<R: Rng>(input_size: usize, hidden_size: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_size, hidden_size);
        for w in p.w_x.iter_mut().chain(p.w_h.iter_mut()).chain(p.b.iter_mut()) {
            *w = rng.gen_range(-scale..scale);
        }
        for b in &mut p.b[hidden_size..2 * hidden_size] {
            *b = 1.0;
        }
        p
    }

    pub fn check_shapes(&self) -> Result<(), SeqError> {
        let (i, h) = (self.input_size, self.hidden_size);
        if self.w_x.len() != 4 * h * i || self.w_h.len() != 4 * h * h || self.b.len() != 4 * h {
            return Err(SeqError::ShapeMismatch(format!(
                "LSTM tensors do not match input {i}, hidden {h}"
            )));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, h_prev: &[f64], c_prev: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>, StepCache) {
        let h = self.hidden_size;
        let mut a = self.b.clone();
        matvec_add(&self.w_x, x, &mut a);
        matvec_add(&self.w_h, h_prev, &mut a);
        for (j, v) in a.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&j) {
                v.tanh()
            } else {
                sigmoid(*v)
            };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        for j in 0..h {
            let (ig, fg, gg, og) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
            c[j] = fg * c_prev[j] + ig * gg;
            tanh_c[j] = c[j].tanh();
            h_out[j] = og * tanh_c[j];
        }
        let cache = StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates: a,
            tanh_c,
        };
        (h_out, c, cache)
    }

    /// Accumulates parameter gradients for one step and returns
    /// `(dL/dh_prev, dL/dc_prev)`. `dh` and `dc` are the total upstream
    /// gradients for this step's outputs.
    pub(crate) fn backward(
        &self,
        cache: &StepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut LstmParams,
    ) -> (Vec<f64>, Vec<f64>) {
        let h = self.hidden_size;
        let g = &cache.gates;
        let mut da = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let (ig, fg, gg, og) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = cache.tanh_c[j];
            let dct = dc[j] + dh[j] * og * (1.0 - tc * tc);
            da[j] = dct * gg * ig * (1.0 - ig);
            da[h + j] = dct * cache.c_prev[j] * fg * (1.0 - fg);
            da[2 * h + j] = dct * ig * (1.0 - gg * gg);
            da[3 * h + j] = dh[j] * tc * og * (1.0 - og);
            dc_prev[j] = dct * fg;
        }
        outer_add(&mut grads.w_x, &da, &cache.x);
        outer_add(&mut grads.w_h, &da, &cache.h_prev);
        for (gb, d) in grads.b.iter_mut().zip(&da) {
            *gb += d;
        }
        let mut dh_prev = vec![0.0; h];
        matvec_t_add(&self.w_h, &da, &mut dh_prev);
        (dh_prev, dc_prev)
    }
}

/// One LSTM step: `i, f, o = σ(·)`, `g = tanh(·)`, `c = f⊙c_prev + i⊙g`,
/// `h = o⊙tanh(c)`.
pub fn lstm_step(p: &LstmParams, h_prev: &[f64], c_prev: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SeqError> {
    p.check_shapes()?;
    if h_prev.len() != p.hidden_size || c_prev.len() != p.hidden_size || x.len() != p.input_size {
        return Err(SeqError::ShapeMismatch(format!(
            "lstm_step: h {} c {} x {} vs hidden {} input {}",
            h_prev.len(),
            c_prev.len(),
            x.len(),
            p.hidden_size,
            p.input_size
        )));
    }
    let (h, c, _) = p.forward(h_prev, c_prev, x);
    Ok((h, c))
}
