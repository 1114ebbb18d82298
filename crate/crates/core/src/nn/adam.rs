use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for every parameter plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Array2<T>>,
    pub v: Vec<Array2<T>>,
    pub t: u64,
    pub config: AdamConfig,
}

impl<T: Real> AdamState<T> {
    pub fn new(store: &ParamStore<T>, config: AdamConfig) -> Self {
        let zeros = || store.values().iter().map(|p| Array2::zeros(p.dim())).collect();
        AdamState {
            m: zeros(),
            v: zeros(),
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update:
/// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`,
/// `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step<T: Real>(
    store: &mut ParamStore<T>,
    grads: &[Array2<T>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if grads.len() != store.len()
        || grads.iter().zip(store.values()).any(|(g, p)| g.dim() != p.dim())
        || state.m.len() != store.len()
    {
        return Err(Error::shape("adam_step", "gradients do not match parameters"));
    }
    state.t += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    let (b1, b2) = (T::of(beta1), T::of(beta2));
    let (one_b1, one_b2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
    let (lr, eps, c1, c2) = (T::of(lr), T::of(eps), T::of(c1), T::of(c2));
    for (((p, g), m), v) in store
        .values_mut()
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        });
    }
    Ok(())
}
