//! Adam over the flattened parameter vector.

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: usize,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    for idx in 0..params.len() {
        let g = grads[idx];
        state.m[idx] = beta1 * state.m[idx] + (1.0 - beta1) * g;
        state.v[idx] = beta2 * state.v[idx] + (1.0 - beta2) * g * g;
        let m_hat = state.m[idx] / bc1;
        let v_hat = state.v[idx] / bc2;
        params[idx] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut params = vec![1.0, -2.0, 0.5];
        let mut fresh = AdamState::new(3);
        let before = params.clone();
        adam_step(&mut params, &[0.0; 3], &mut fresh, 1e-3, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        assert_eq!(params, before);

        // moments decay toward zero under zero gradients
        let mut state = AdamState { m: vec![1.0], v: vec![1.0], t: 5 };
        let mut p = vec![0.0];
        adam_step(&mut p, &[0.0], &mut state, 0.0, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        assert!((state.m[0] - ADAM_BETA1).abs() < 1e-15);
        assert!((state.v[0] - ADAM_BETA2).abs() < 1e-15);
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        // From zero state, m_hat = g and v_hat = g^2, so the update is
        // -lr * g / (|g| + eps) ~ -lr * sign(g).
        for &g in &[3.0, -0.02, 1e4] {
            let mut params = vec![0.0];
            let mut state = AdamState::new(1);
            adam_step(&mut params, &[g], &mut state, 1e-3, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
            let expect = -1e-3 * g.signum();
            assert!((params[0] - expect).abs() < 1e-6, "g={g}: {}", params[0]);
        }
    }

    #[test]
    fn constant_gradient_step_approaches_lr() {
        // With a constant gradient the bias-corrected moments converge to g
        // and g^2, so each step's magnitude tends to lr.
        let g = 0.37;
        let lr = 1e-3;
        let mut params = vec![10.0];
        let mut state = AdamState::new(1);
        let mut last = params[0];
        let mut step_size = 0.0;
        for _ in 0..1000 {
            adam_step(&mut params, &[g], &mut state, lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
            step_size = (params[0] - last).abs();
            last = params[0];
        }
        assert!((step_size - lr).abs() / lr < 0.05, "step {step_size}");
    }
}
