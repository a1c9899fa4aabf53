//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::nn::mlp::MlpParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Update one buffer in place. `step` is the 1-based step index used for bias
/// correction.
pub fn adam_update(cfg: &AdamConfig, step: u64, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: MlpParams,
    pub v: MlpParams,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step_count: 0,
        }
    }
}

/// One Adam step on `params`. A non-finite gradient entry rejects the whole
/// update and leaves both the parameters and the state untouched.
pub fn adam_step(params: &mut MlpParams, grads: &MlpParams, state: &mut AdamState) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(Error::InvalidArgument("adam: parameter, gradient and state shapes differ".into()));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("adam: gradient contains a non-finite entry".into()));
    }
    state.step_count += 1;
    let step = state.step_count;
    for (k, layer) in params.layers.iter_mut().enumerate() {
        let g = &grads.layers[k];
        let m = &mut state.m.layers[k];
        let v = &mut state.v.layers[k];
        adam_update(&state.config, step, &mut layer.weights, &g.weights, &mut m.weights, &mut v.weights);
        adam_update(&state.config, step, &mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}
