//! Backpropagation through time for the two-layer model, including the
//! dense head, the inter-layer dropout masks, and both loss functions.

use super::{ForwardCache, LayerCache, LossKind, LstmLayerParams, ModelParams, SHARPE_VAR_EPS};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub layer1: LayerGrads,
    pub layer2: LayerGrads,
    pub dense_w: Array1<f64>,
    pub dense_b: f64,
}

impl Gradients {
    /// Same order as `ModelParams::flatten`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in [&self.layer1, &self.layer2] {
            out.extend(layer.w.iter());
            out.extend(layer.u.iter());
            out.extend(layer.b.iter());
        }
        out.extend(self.dense_w.iter());
        out.push(self.dense_b);
        out
    }
}

/// Loss value and dL/dpred. For MSE `aux` is the target vector; for the
/// Sharpe loss it is the vector of realized returns.
pub fn loss_grad(
    kind: LossKind,
    preds: &Array1<f64>,
    aux: &Array1<f64>,
    gamma: f64,
) -> Result<(f64, Array1<f64>)> {
    if preds.len() != aux.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: aux.len() });
    }
    let n = preds.len();
    match kind {
        LossKind::Mse => {
            let loss = super::loss_mse(preds, aux)?;
            let grad = Array1::from_shape_fn(n, |i| 2.0 * (preds[i] - aux[i]) / n as f64);
            Ok((loss, grad))
        }
        LossKind::Sharpe => {
            if n < 2 {
                return Err(Error::TooShort { needed: 2, got: n });
            }
            let w: Vec<f64> = preds.iter().map(|p| (gamma * p).tanh()).collect();
            let pnl: Vec<f64> = w.iter().zip(aux.iter()).map(|(w, r)| w * r).collect();
            let nf = n as f64;
            let mean = pnl.iter().sum::<f64>() / nf;
            let var = pnl.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
            if var <= SHARPE_VAR_EPS {
                return Err(Error::DegenerateVariance);
            }
            let std = var.sqrt();
            let loss = -mean / std;
            // dL/dpnl_i = -1/(n s) + mean (pnl_i - mean) / (n s^3), then
            // through pnl_i = tanh(gamma pred_i) r_i.
            let grad = Array1::from_shape_fn(n, |i| {
                let dpnl = -1.0 / (nf * std) + mean * (pnl[i] - mean) / (nf * std.powi(3));
                dpnl * aux[i] * gamma * (1.0 - w[i] * w[i])
            });
            Ok((loss, grad))
        }
    }
}

/// BPTT through one layer. `dh_seq[t]` is the gradient flowing into h_t
/// from above; returns parameter gradients and the gradient w.r.t. the
/// layer inputs at every timestep.
fn layer_backward(
    params: &LstmLayerParams,
    cache: &LayerCache,
    dh_seq: &[Array2<f64>],
) -> (LayerGrads, Vec<Array2<f64>>) {
    let steps = &cache.steps;
    let t_len = steps.len();
    let batch = steps[0].h.nrows();
    let h = params.hidden;

    let mut dw = Array2::<f64>::zeros(params.w.dim());
    let mut du = Array2::<f64>::zeros(params.u.dim());
    let mut db = Array1::<f64>::zeros(4 * h);
    let mut dx_seq = vec![Array2::<f64>::zeros((batch, params.input)); t_len];

    let zeros = Array2::<f64>::zeros((batch, h));
    let mut dh_rec = Array2::<f64>::zeros((batch, h));
    let mut dc_rec = Array2::<f64>::zeros((batch, h));

    for t in (0..t_len).rev() {
        let step = &steps[t];
        let c_prev = if t == 0 { &zeros } else { &steps[t - 1].c };
        let h_prev = if t == 0 { &zeros } else { &steps[t - 1].h };

        let dh = &dh_seq[t] + &dh_rec;
        let d_o = &dh * &step.tanh_c;
        let dc = &dh * &step.o * step.tanh_c.mapv(|v| 1.0 - v * v) + &dc_rec;
        let di = &dc * &step.g;
        let dg = &dc * &step.i;
        let df = &dc * c_prev;
        dc_rec = &dc * &step.f;

        // gate pre-activation gradients, packed (i, f, g, o)
        let mut dz = Array2::<f64>::zeros((batch, 4 * h));
        for b in 0..batch {
            for j in 0..h {
                let iv = step.i[[b, j]];
                let fv = step.f[[b, j]];
                let gv = step.g[[b, j]];
                let ov = step.o[[b, j]];
                dz[[b, j]] = di[[b, j]] * iv * (1.0 - iv);
                dz[[b, h + j]] = df[[b, j]] * fv * (1.0 - fv);
                dz[[b, 2 * h + j]] = dg[[b, j]] * (1.0 - gv * gv);
                dz[[b, 3 * h + j]] = d_o[[b, j]] * ov * (1.0 - ov);
            }
        }

        ndarray::linalg::general_mat_mul(1.0, &dz.t(), &cache.xs[t], 1.0, &mut dw);
        ndarray::linalg::general_mat_mul(1.0, &dz.t(), h_prev, 1.0, &mut du);
        for row in dz.rows() {
            db += &row;
        }
        dx_seq[t] = dz.dot(&params.w);
        dh_rec = dz.dot(&params.u);
    }
    (LayerGrads { w: dw, u: du, b: db }, dx_seq)
}

/// Full backward pass from a training-mode forward cache. Returns the
/// loss value and gradients for every parameter.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    loss: LossKind,
    aux: &Array1<f64>,
    gamma: f64,
) -> Result<(f64, Gradients)> {
    let (loss_value, dpred) = loss_grad(loss, &cache.preds, aux, gamma)?;
    let batch = cache.preds.len();
    let t_len = cache.layer2.steps.len();
    let h = params.layer2.hidden;

    // dense head
    let mut dense_w = Array1::<f64>::zeros(h);
    let mut dense_b = 0.0;
    for b in 0..batch {
        dense_b += dpred[b];
        for j in 0..h {
            dense_w[j] += dpred[b] * cache.h_last[[b, j]];
        }
    }

    // layer 2 receives gradient only at the last timestep
    let mut dh2 = vec![Array2::<f64>::zeros((batch, h)); t_len];
    for b in 0..batch {
        for j in 0..h {
            dh2[t_len - 1][[b, j]] = dpred[b] * params.dense_w[j];
        }
    }
    let (grads2, dx2) = layer_backward(&params.layer2, &cache.layer2, &dh2);

    // through the dropout masks into layer 1's hidden sequence
    let dh1: Vec<Array2<f64>> = match &cache.masks {
        Some(masks) => dx2.iter().zip(masks).map(|(dx, m)| dx * m).collect(),
        None => dx2,
    };
    let (grads1, _) = layer_backward(&params.layer1, &cache.layer1, &dh1);

    let grads = Gradients { layer1: grads1, layer2: grads2, dense_w, dense_b };
    if grads.flatten().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient { context: "lstm backward".into() });
    }
    Ok((loss_value, grads))
}
