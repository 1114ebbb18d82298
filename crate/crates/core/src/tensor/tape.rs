use std::sync::Arc;

use ndarray::{Array1, Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::real::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub(crate) enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, T),
    ScaleBy(Var, Var),
    Relu(Var),
    Softplus(Var),
    NeighborSum(Var, Arc<[(usize, usize)]>),
    SegmentSum(Var, Arc<[usize]>),
    GatherRows(Var, Arc<[usize]>),
    ConcatCols(Var, Var),
    SelectCol(Var, usize),
    MulColumn(Var, Var),
    RowSum(Var),
    SumAll(Var),
    SoftmaxRows(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Arc<[usize]>,
        probs: Array2<T>,
    },
    Rmse {
        pred: Var,
        target: Array2<T>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<T>,
        inv_std: Array1<T>,
        batch_stats: bool,
    },
    Dropout {
        x: Var,
        mask: Array2<T>,
    },
}

pub(crate) struct Node<T> {
    pub(crate) value: Array2<T>,
    pub(crate) op: Op<T>,
    pub(crate) requires_grad: bool,
}

/// Ordered record of operations. Inputs always precede their consumers.
pub struct Tape<T> {
    pub(crate) nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input value. Gradients are only tracked when
    /// `requires_grad` is set.
    pub fn leaf(&mut self, value: Array2<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Array2<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn scalar(&mut self, value: T) -> Var {
        self.constant(Array2::from_elem((1, 1), value))
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    /// Value of a `1 x 1` tensor.
    pub fn item(&self, v: Var) -> T {
        self.nodes[v.0].value[(0, 0)]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub(crate) fn push(&mut self, value: Array2<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Reverse sweep from a scalar `loss`. Every record is visited once, in
    /// reverse order.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("loss must be 1x1, got {:?}", self.shape(loss)),
            ));
        }
        let mut grads: Vec<Option<Array2<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::from_elem((1, 1), T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, i: usize, g: &Array2<T>, grads: &mut [Option<Array2<T>>]) {
        let node = &self.nodes[i];
        let mut acc = |v: Var, delta: Array2<T>| {
            if !self.wants(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.dot(&self.value(*b).t()));
                }
                if self.wants(*b) {
                    acc(*b, self.value(*a).t().dot(g));
                }
            }
            Op::AddBias(x, b) => {
                acc(*x, g.clone());
                if self.wants(*b) {
                    acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Scale(x, c) => acc(*x, g * *c),
            Op::ScaleBy(x, s) => {
                let sv = self.item(*s);
                if self.wants(*s) {
                    let ds = (g * self.value(*x)).sum();
                    acc(*s, Array2::from_elem((1, 1), ds));
                }
                acc(*x, g * sv);
            }
            Op::Relu(x) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(self.value(*x))
                    .for_each(|d, &x| {
                        if x <= T::zero() {
                            *d = T::zero();
                        }
                    });
                acc(*x, d);
            }
            Op::Softplus(x) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(self.value(*x))
                    .for_each(|d, &x| *d *= sigmoid(x));
                acc(*x, d);
            }
            Op::NeighborSum(x, edges) => {
                let (n, _) = self.shape(*x);
                let reversed = edges.iter().map(|&(s, d)| (d, s));
                acc(*x, super::ops::scatter_edges(g, reversed, n));
            }
            Op::SegmentSum(x, seg) => acc(*x, super::ops::gather(g, seg)),
            Op::GatherRows(x, idx) => {
                let (n, _) = self.shape(*x);
                acc(*x, super::ops::scatter_rows(g, idx, n));
            }
            Op::ConcatCols(a, b) => {
                let ca = self.shape(*a).1;
                acc(*a, g.slice(ndarray::s![.., ..ca]).to_owned());
                acc(*b, g.slice(ndarray::s![.., ca..]).to_owned());
            }
            Op::SelectCol(x, j) => {
                let mut d = Array2::zeros(self.shape(*x));
                d.column_mut(*j).assign(&g.column(0));
                acc(*x, d);
            }
            Op::MulColumn(x, c) => {
                let cv = self.value(*c);
                if self.wants(*c) {
                    let dc = (g * self.value(*x)).sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(*c, dc);
                }
                acc(*x, g * cv);
            }
            Op::RowSum(x) => {
                let (n, d) = self.shape(*x);
                acc(*x, g.broadcast((n, d)).expect("row gradient broadcasts").to_owned());
            }
            Op::SumAll(x) => acc(*x, Array2::from_elem(self.shape(*x), g[(0, 0)])),
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let dot = (g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                acc(*x, y * &(g - &dot));
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let mut d = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    d[(r, t)] -= T::one();
                }
                acc(*logits, d * g[(0, 0)]);
            }
            Op::Rmse { pred, target } => {
                let r = node.value[(0, 0)];
                if r > T::zero() {
                    let n = T::of(target.nrows() as f64);
                    let k = g[(0, 0)] / (n * r);
                    acc(*pred, (self.value(*pred) - target) * k);
                } else {
                    acc(*pred, Array2::zeros(target.raw_dim()));
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let gv = self.value(*gamma).row(0).to_owned();
                if self.wants(*gamma) {
                    acc(*gamma, (g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                if self.wants(*beta) {
                    acc(*beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                if self.wants(*x) {
                    let scale = &gv * inv_std;
                    let dx = if *batch_stats {
                        let n = T::of(g.nrows() as f64);
                        let sum_g = g.sum_axis(Axis(0));
                        let sum_gx = (g * xhat).sum_axis(Axis(0));
                        let mut dx = g * n - &sum_g - &(xhat * &sum_gx);
                        dx *= &(scale / n);
                        dx
                    } else {
                        g * &scale
                    };
                    acc(*x, dx);
                }
            }
            Op::Dropout { x, mask } => acc(*x, g * mask),
        }
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Result of a reverse sweep.
pub struct Gradients<T> {
    grads: Vec<Option<Array2<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of `v`, if the loss depends on it.
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, zeros of `shape` when unreached.
    pub fn wrt(&self, v: Var, shape: (usize, usize)) -> Array2<T> {
        self.get(v).cloned().unwrap_or_else(|| Array2::zeros(shape))
    }
}
