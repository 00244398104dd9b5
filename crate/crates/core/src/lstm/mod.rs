//! Two-layer LSTM regressor built from scratch: forward recurrences,
//! full backpropagation through time, Adam, MSE and Sharpe-ratio losses,
//! early stopping with best-weight restoration, and LR-on-plateau
//! scheduling.
//!
//! Layer 1 returns its full hidden sequence, inverted dropout sits between
//! the layers, layer 2 emits only its last hidden state, and a linear head
//! maps it to the scalar forecast. Gate order everywhere is (i, f, g, o);
//! initial hidden and cell states are zero.

mod adam;
mod backward;
mod checkpoint;
mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use backward::{backward, Gradients, LayerGrads};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use train::{
    train, EarlyStopper, EpochLog, StopSignal, TrainConfig, TrainReport, SHARPE_MIN_BATCH,
};

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Sharpe,
}

/// Weights of one LSTM layer. `w` is (4h x d), `u` is (4h x h), `b` is
/// (4h); rows are the four gate blocks in (i, f, g, o) order.
#[derive(Debug, Clone)]
pub struct LstmLayerParams {
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
    pub hidden: usize,
    pub input: usize,
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    pub dense_w: Array1<f64>,
    pub dense_b: f64,
    pub dropout: f64,
}

impl LstmLayerParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((4 * hidden, input)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
            hidden,
            input,
        }
    }

    fn n_params(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }
}

impl ModelParams {
    pub fn n_params(&self) -> usize {
        self.layer1.n_params() + self.layer2.n_params() + self.dense_w.len() + 1
    }

    /// Flatten in checkpoint order: layer1 W,U,b; layer2 W,U,b; dense W,b.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in [&self.layer1, &self.layer2] {
            out.extend(layer.w.iter());
            out.extend(layer.u.iter());
            out.extend(layer.b.iter());
        }
        out.extend(self.dense_w.iter());
        out.push(self.dense_b);
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut pos = 0;
        let mut take = |len: usize| {
            let s = &flat[pos..pos + len];
            pos += len;
            s
        };
        for layer in [&mut self.layer1, &mut self.layer2] {
            let wl = layer.w.len();
            layer.w.as_slice_mut().unwrap().copy_from_slice(take(wl));
            let ul = layer.u.len();
            layer.u.as_slice_mut().unwrap().copy_from_slice(take(ul));
            let bl = layer.b.len();
            layer.b.as_slice_mut().unwrap().copy_from_slice(take(bl));
        }
        let dl = self.dense_w.len();
        self.dense_w.as_slice_mut().unwrap().copy_from_slice(take(dl));
        self.dense_b = take(1)[0];
    }

    pub fn from_flat(input: usize, hidden: usize, dropout: f64, flat: &[f64]) -> Self {
        let mut params = ModelParams {
            layer1: LstmLayerParams::zeros(input, hidden),
            layer2: LstmLayerParams::zeros(hidden, hidden),
            dense_w: Array1::zeros(hidden),
            dense_b: 0.0,
            dropout,
        };
        params.assign_from_flat(flat);
        params
    }
}

fn xavier_fill(a: &mut Array2<f64>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in a.iter_mut() {
        *v = rng.random_range(-limit..limit);
    }
}

/// Xavier-uniform weights (limit sqrt(6/(fan_in+fan_out)) with the full
/// 4h gate block as fan-out); zero biases except the forget-gate slice,
/// which starts at 1.
pub fn init_params(input: usize, hidden: usize, dropout: f64, seed: u64) -> ModelParams {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer1 = LstmLayerParams::zeros(input, hidden);
    let mut layer2 = LstmLayerParams::zeros(hidden, hidden);
    xavier_fill(&mut layer1.w, input, 4 * hidden, &mut rng);
    xavier_fill(&mut layer1.u, hidden, 4 * hidden, &mut rng);
    xavier_fill(&mut layer2.w, hidden, 4 * hidden, &mut rng);
    xavier_fill(&mut layer2.u, hidden, 4 * hidden, &mut rng);
    for layer in [&mut layer1, &mut layer2] {
        layer.b.slice_mut(ndarray::s![hidden..2 * hidden]).fill(1.0);
    }
    let mut dense_w = Array1::zeros(hidden);
    let limit = (6.0 / (hidden + 1) as f64).sqrt();
    for v in dense_w.iter_mut() {
        *v = rng.random_range(-limit..limit);
    }
    ModelParams { layer1, layer2, dense_w, dense_b: 0.0, dropout }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-timestep activations kept for BPTT.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub i: Array2<f64>,
    pub f: Array2<f64>,
    pub g: Array2<f64>,
    pub o: Array2<f64>,
    pub c: Array2<f64>,
    pub tanh_c: Array2<f64>,
    pub h: Array2<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    /// Layer input at each timestep (B x d).
    pub xs: Vec<Array2<f64>>,
    pub steps: Vec<StepCache>,
}

#[derive(Debug)]
pub struct ForwardCache {
    pub(crate) layer1: LayerCache,
    pub(crate) layer2: LayerCache,
    /// Inverted-dropout masks (values 0 or 1/(1-p)), one B x h matrix per
    /// timestep; `None` in inference mode or when dropout is 0.
    pub(crate) masks: Option<Vec<Array2<f64>>>,
    pub(crate) h_last: Array2<f64>,
    pub preds: Array1<f64>,
}

fn run_layer(
    params: &LstmLayerParams,
    xs: Vec<Array2<f64>>,
    batch: usize,
) -> LayerCache {
    let h = params.hidden;
    let mut hidden = Array2::<f64>::zeros((batch, h));
    let mut cell = Array2::<f64>::zeros((batch, h));
    let mut steps = Vec::with_capacity(xs.len());
    let w_t = params.w.t();
    let u_t = params.u.t();
    for x in &xs {
        let mut z = x.dot(&w_t) + hidden.dot(&u_t);
        for mut row in z.rows_mut() {
            row += &params.b;
        }
        let mut i = Array2::zeros((batch, h));
        let mut f = Array2::zeros((batch, h));
        let mut g = Array2::zeros((batch, h));
        let mut o = Array2::zeros((batch, h));
        for b in 0..batch {
            for j in 0..h {
                i[[b, j]] = sigmoid(z[[b, j]]);
                f[[b, j]] = sigmoid(z[[b, h + j]]);
                g[[b, j]] = z[[b, 2 * h + j]].tanh();
                o[[b, j]] = sigmoid(z[[b, 3 * h + j]]);
            }
        }
        let c = &f * &cell + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        let new_h = &o * &tanh_c;
        hidden = new_h.clone();
        cell = c.clone();
        steps.push(StepCache { i, f, g, o, c, tanh_c, h: new_h });
    }
    LayerCache { xs, steps }
}

/// Forward pass over a batch (B x T x m). In train mode an inverted
/// dropout mask is sampled between the layers from `rng`; inference never
/// touches the RNG and is deterministic.
pub fn forward(
    params: &ModelParams,
    batch: &Array3<f64>,
    train_mode: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardCache> {
    let (b, t, m) = batch.dim();
    if m != params.layer1.input {
        return Err(Error::ShapeMismatch {
            expected: format!("input size {}", params.layer1.input),
            got: format!("{m}"),
        });
    }
    if b == 0 || t == 0 {
        return Err(Error::EmptyInput);
    }

    let xs1: Vec<Array2<f64>> =
        (0..t).map(|step| batch.index_axis(Axis(1), step).to_owned()).collect();
    let layer1 = run_layer(&params.layer1, xs1, b);

    let p = params.dropout;
    let (dropped, masks) = if train_mode && p > 0.0 {
        let scale = 1.0 / (1.0 - p);
        let mut masks = Vec::with_capacity(t);
        let mut dropped = Vec::with_capacity(t);
        for step in &layer1.steps {
            let mask = Array2::from_shape_fn((b, params.layer1.hidden), |_| {
                if rng.random::<f64>() < p {
                    0.0
                } else {
                    scale
                }
            });
            dropped.push(&step.h * &mask);
            masks.push(mask);
        }
        (dropped, Some(masks))
    } else {
        (layer1.steps.iter().map(|s| s.h.clone()).collect(), None)
    };

    let layer2 = run_layer(&params.layer2, dropped, b);
    let h_last = layer2.steps.last().unwrap().h.clone();
    let preds = Array1::from_shape_fn(b, |row| {
        h_last.row(row).dot(&params.dense_w) + params.dense_b
    });
    if preds.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { context: "lstm forward predictions".into() });
    }
    Ok(ForwardCache { layer1, layer2, masks, h_last, preds })
}

/// Convenience: predictions only, inference mode.
pub fn predict(params: &ModelParams, batch: &Array3<f64>) -> Result<Array1<f64>> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(forward(params, batch, false, &mut rng)?.preds)
}

/// Mean squared error.
pub fn loss_mse(preds: &Array1<f64>, targets: &Array1<f64>) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: targets.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(preds
        .iter()
        .zip(targets.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64)
}

pub const SHARPE_VAR_EPS: f64 = 1e-12;

/// Sharpe-ratio loss: -mean(w r) / std(w r) with w = tanh(gamma * pred)
/// and population std. Errors out when Var[w r] falls below 1e-12.
pub fn loss_sharpe(preds: &Array1<f64>, returns: &Array1<f64>, gamma: f64) -> Result<f64> {
    if preds.len() != returns.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: returns.len() });
    }
    let n = preds.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let pnl: Vec<f64> = preds
        .iter()
        .zip(returns.iter())
        .map(|(p, r)| (gamma * p).tanh() * r)
        .collect();
    let mean = pnl.iter().sum::<f64>() / n as f64;
    let var = pnl.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var <= SHARPE_VAR_EPS {
        return Err(Error::DegenerateVariance);
    }
    Ok(-mean / var.sqrt())
}

#[cfg(test)]
mod tests;
