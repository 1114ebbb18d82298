use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Gradients, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable arrays, addressed by [`ParamId`] in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Array2<T>>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<T>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array2<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn values(&self) -> &[Array2<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Array2<T>] {
        &mut self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    /// Records every parameter as a gradient-tracked leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        Bound(self.values.iter().map(|v| tape.param(v.clone())).collect())
    }

    /// Replaces all values; shapes must match.
    pub fn set_values(&mut self, values: Vec<Array2<T>>) -> Result<()> {
        if values.len() != self.values.len()
            || values.iter().zip(&self.values).any(|(a, b)| a.dim() != b.dim())
        {
            return Err(Error::shape("set_values", "parameter layout differs"));
        }
        self.values = values;
        Ok(())
    }
}

/// Tape handles of a bound [`ParamStore`], indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound(pub Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    /// Gradient of every parameter, zeros where the loss does not reach.
    pub fn grads<T: Real>(&self, store: &ParamStore<T>, grads: &Gradients<T>) -> Vec<Array2<T>> {
        self.0
            .iter()
            .zip(store.values())
            .map(|(&v, p)| grads.wrt(v, p.dim()))
            .collect()
    }
}

/// `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<T> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || T::of(rng.random_range(-a..a)))
}
