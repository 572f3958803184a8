use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient added to the gradient before the moment updates
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// Moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState<T = f64> {
    pub config: AdamConfig,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, params: &[&Tensor<T>]) -> Self {
        Self {
            config,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }
}

/// One Adam update with classic L2 weight decay:
/// `g ← g + λθ`, `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `θ ← θ − α·m̂ / (√v̂ + ε)` with bias-corrected `m̂`, `v̂`.
pub fn adam_step<T: Real>(
    params: &mut [&mut Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::dim(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::dim(format!(
                "parameter {:?} vs gradient {:?} vs moment {:?}",
                p.shape(),
                g.shape(),
                m.shape()
            )));
        }
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (k, theta) in p.data_mut().iter_mut().enumerate() {
            let th = theta.as_f64();
            let gk = g.data()[k].as_f64() + c.weight_decay * th;
            let mk = c.beta1 * m[k].as_f64() + (1.0 - c.beta1) * gk;
            let vk = c.beta2 * v[k].as_f64() + (1.0 - c.beta2) * gk * gk;
            m[k] = T::cst(mk);
            v[k] = T::cst(vk);
            *theta = T::cst(th - c.lr * (mk / bc1) / ((vk / bc2).sqrt() + c.eps));
        }
        if !p.is_finite() {
            return Err(Error::NonFinite("adam_step"));
        }
    }
    Ok(())
}
