use ndarray::Array2;
use rand::Rng;

use super::params::{glorot_uniform, Bound, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{BatchNormState, Mode, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BnParams {
    pub gamma: ParamId,
    pub beta: ParamId,
}

/// Two-layer perceptron `a -> h -> b`, optionally followed by batch
/// normalization and a ReLU.
///
/// With normalization attached the second layer has no bias: the BN shift
/// subsumes it and a bias there would receive an identically zero gradient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: Option<ParamId>,
    pub bn: Option<BnParams>,
    pub dims: (usize, usize, usize),
}

impl MlpParams {
    /// Registers the MLP's arrays under `prefix`. Weights are Glorot-uniform,
    /// biases zero, BN scale one and shift zero.
    pub fn init<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        prefix: &str,
        (a, h, b): (usize, usize, usize),
        with_bn: bool,
    ) -> Self {
        let w1 = store.add(format!("{prefix}.w1"), glorot_uniform(rng, a, h));
        let b1 = store.add(format!("{prefix}.b1"), Array2::zeros((1, h)));
        let w2 = store.add(format!("{prefix}.w2"), glorot_uniform(rng, h, b));
        let (b2, bn) = if with_bn {
            let gamma = store.add(format!("{prefix}.bn.gamma"), Array2::ones((1, b)));
            let beta = store.add(format!("{prefix}.bn.beta"), Array2::zeros((1, b)));
            (None, Some(BnParams { gamma, beta }))
        } else {
            (Some(store.add(format!("{prefix}.b2"), Array2::zeros((1, b)))), None)
        };
        MlpParams {
            w1,
            b1,
            w2,
            b2,
            bn,
            dims: (a, h, b),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims.0
    }

    pub fn output_dim(&self) -> usize {
        self.dims.2
    }
}

/// `linear -> ReLU -> linear`, then `BN -> ReLU` when normalization is
/// attached. `bn_state` must be given exactly when the MLP carries BN.
pub fn mlp_forward<T: Real>(
    tape: &mut Tape<T>,
    bound: &Bound,
    p: &MlpParams,
    x: Var,
    bn_state: Option<&mut BatchNormState<T>>,
    mode: Mode,
) -> Result<Var> {
    let width = tape.shape(x).1;
    if width != p.input_dim() {
        return Err(Error::shape(
            "mlp_forward",
            format!("input width {width}, expected {}", p.input_dim()),
        ));
    }
    let h = tape.linear(x, bound.var(p.w1), bound.var(p.b1))?;
    let h = tape.relu(h);
    let h = tape.matmul(h, bound.var(p.w2))?;
    match (p.bn, p.b2, bn_state) {
        (Some(bn), _, Some(state)) => {
            let h = tape.batch_norm(h, bound.var(bn.gamma), bound.var(bn.beta), state, mode)?;
            Ok(tape.relu(h))
        }
        (None, Some(b2), None) => tape.add_bias(h, bound.var(b2)),
        _ => Err(Error::invalid("batch-norm state must accompany a BN-equipped MLP")),
    }
}
