//! Adam with bias-corrected moment estimates.

use crate::numerics::Vector;

/// Adam hyperparameters. Everything except the batch size follows the
/// published defaults of the method; 512 is the batch size that proved
/// robust in the experiments this library reproduces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 512,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) {
        assert!(self.lr > 0.0, "AdamConfig: lr must be positive");
        assert!(
            (0.0..1.0).contains(&self.beta1),
            "AdamConfig: beta1 must be in [0, 1)"
        );
        assert!(
            (0.0..1.0).contains(&self.beta2),
            "AdamConfig: beta2 must be in [0, 1)"
        );
        assert!(self.eps > 0.0, "AdamConfig: eps must be positive");
        assert!(self.batch_size > 0, "AdamConfig: batch_size must be positive");
    }
}

/// First/second moment estimates plus the step counter that drives bias
/// correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vector,
    pub v: Vector,
    pub t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: Vector::zeros(dim),
            v: Vector::zeros(dim),
            t: 0,
        }
    }
}

/// One Adam update. Returns the new parameters; the state is advanced in
/// place (`t` increases by exactly one).
pub fn adam_step(
    state: &mut AdamState,
    config: &AdamConfig,
    params: &Vector,
    grad: &Vector,
) -> Vector {
    assert_eq!(params.len(), grad.len(), "adam_step: dimension mismatch");
    assert_eq!(params.len(), state.m.len(), "adam_step: state dimension mismatch");
    state.t += 1;
    let bc1 = 1.0 - config.beta1.powi(state.t as i32);
    let bc2 = 1.0 - config.beta2.powi(state.t as i32);
    let mut new_params = params.clone();
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        new_params[i] = params[i] - config.lr * m_hat / (v_hat.sqrt() + config.eps);
    }
    new_params
}
