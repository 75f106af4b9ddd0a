//! Adam with bias correction.

use super::params::ParamSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    m: ParamSet,
    v: ParamSet,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        OptimizerState { config, step: 0, m: params.zeros_like(), v: params.zeros_like() }
    }
}

/// One Adam update of `params` using `grads`.
pub fn optimizer_step(params: &mut ParamSet, grads: &ParamSet, state: &mut OptimizerState) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient is not finite".into()));
    }
    let c = state.config;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let tensors = params.iter_values_mut().zip(grads.iter_values()).zip(state.m.iter_values_mut().zip(state.v.iter_values_mut()));
    for ((p, g), (m, v)) in tensors {
        for i in 0..p.len() {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] -= c.lr * mhat / (vhat.sqrt() + c.eps);
        }
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("parameters became non-finite".into()));
    }
    Ok(())
}
