use std::sync::Arc;

use ndarray::{concatenate, Array1, Array2, Axis, Zip};
use rand::Rng;

use super::tape::{Mode, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::real::Real;

/// Running statistics of one batch-normalization layer. The learnable
/// scale/shift live with the other parameters and are passed as `Var`s.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T> {
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
    /// `new = (1 - momentum) * old + momentum * batch`
    pub momentum: T,
    pub eps: T,
}

impl<T: Real> BatchNormState<T> {
    pub fn new(dim: usize, momentum: T, eps: T) -> Self {
        BatchNormState {
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            momentum,
            eps,
        }
    }

    pub fn dim(&self) -> usize {
        self.running_mean.len()
    }
}

/// `out[d] += src[s]` for every `(s, d)`.
pub(crate) fn scatter_edges<T: Real>(
    src: &Array2<T>,
    edges: impl Iterator<Item = (usize, usize)>,
    n_out: usize,
) -> Array2<T> {
    // Accumulating in f64 makes single-precision sums independent of the
    // order in which nodes or edges are listed.
    let mut out = Array2::<f64>::zeros((n_out, src.ncols()));
    for (s, d) in edges {
        for (o, v) in out.row_mut(d).iter_mut().zip(src.row(s)) {
            *o += v.to_f64_lossy();
        }
    }
    out.mapv(T::of)
}

/// `out[i] = src[idx[i]]`.
pub(crate) fn gather<T: Real>(src: &Array2<T>, idx: &[usize]) -> Array2<T> {
    src.select(Axis(0), idx)
}

/// `out[idx[i]] += src[i]`.
pub(crate) fn scatter_rows<T: Real>(src: &Array2<T>, idx: &[usize], n_out: usize) -> Array2<T> {
    scatter_edges(src, idx.iter().copied().enumerate(), n_out)
}

fn check_rows(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a.0 != b.0 {
        return Err(Error::shape(op, format!("row counts {} and {} differ", a.0, b.0)));
    }
    Ok(())
}

impl<T: Real> Tape<T> {
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let out = self.value(a).dot(self.value(b));
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    /// Adds the `1 x d` row `b` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(b));
        if sb != (1, sx.1) {
            return Err(Error::shape("add_bias", format!("bias {sb:?} for input {sx:?}")));
        }
        let out = self.value(x) + self.value(b);
        Ok(self.push(out, Op::AddBias(x, b), &[x, b]))
    }

    /// `x W + b`, bias broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape("add", format!("{sa:?} + {sb:?}")));
        }
        let out = self.value(a) + self.value(b);
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let out = self.value(x) * c;
        self.push(out, Op::Scale(x, c), &[x])
    }

    /// Multiplies every entry of `x` by the `1 x 1` tensor `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            return Err(Error::shape("scale_by", format!("scale must be 1x1, got {:?}", self.shape(s))));
        }
        let out = self.value(x) * self.item(s);
        Ok(self.push(out, Op::ScaleBy(x, s), &[x, s]))
    }

    /// Elementwise `max(0, x)`; the derivative at 0 is taken as 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| if v > T::zero() { v } else { T::zero() });
        self.push(out, Op::Relu(x), &[x])
    }

    /// Elementwise `ln(1 + e^x)`.
    pub fn softplus(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(softplus);
        self.push(out, Op::Softplus(x), &[x])
    }

    /// Row `v` of the output is the sum of `x[u]` over directed edges
    /// `(u, v)`. Rows without incoming edges are zero.
    pub fn neighbor_sum(&mut self, x: Var, edges: &Arc<[(usize, usize)]>) -> Result<Var> {
        let n = self.shape(x).0;
        if let Some(&(s, d)) = edges.iter().find(|&&(s, d)| s >= n || d >= n) {
            return Err(Error::Index {
                op: "neighbor_sum",
                index: s.max(d),
                bound: n,
            });
        }
        let out = scatter_edges(self.value(x), edges.iter().copied(), n);
        Ok(self.push(out, Op::NeighborSum(x, edges.clone()), &[x]))
    }

    /// Row `g` of the `[num_segments x d]` output sums the rows of `x` whose
    /// segment id is `g`.
    pub fn segment_sum(&mut self, x: Var, seg: &Arc<[usize]>, num_segments: usize) -> Result<Var> {
        let n = self.shape(x).0;
        if seg.len() != n {
            return Err(Error::shape("segment_sum", format!("{} segment ids for {n} rows", seg.len())));
        }
        if let Some(&bad) = seg.iter().find(|&&s| s >= num_segments) {
            return Err(Error::Index {
                op: "segment_sum",
                index: bad,
                bound: num_segments,
            });
        }
        let out = scatter_rows(self.value(x), seg, num_segments);
        Ok(self.push(out, Op::SegmentSum(x, seg.clone()), &[x]))
    }

    /// `out[i] = x[idx[i]]`; used to broadcast graph-level rows to nodes.
    pub fn gather_rows(&mut self, x: Var, idx: &Arc<[usize]>) -> Result<Var> {
        let n = self.shape(x).0;
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Index {
                op: "gather_rows",
                index: bad,
                bound: n,
            });
        }
        let out = gather(self.value(x), idx);
        Ok(self.push(out, Op::GatherRows(x, idx.clone()), &[x]))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        check_rows("concat_cols", self.shape(a), self.shape(b))?;
        let out = concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("row counts checked");
        Ok(self.push(out, Op::ConcatCols(a, b), &[a, b]))
    }

    /// Column `j` as an `[N x 1]` tensor.
    pub fn select_col(&mut self, x: Var, j: usize) -> Result<Var> {
        let (_, c) = self.shape(x);
        if j >= c {
            return Err(Error::Index {
                op: "select_col",
                index: j,
                bound: c,
            });
        }
        let out = self.value(x).column(j).to_owned().insert_axis(Axis(1));
        Ok(self.push(out, Op::SelectCol(x, j), &[x]))
    }

    /// Scales row `i` of `x` by `c[i]`, with `c` of shape `[N x 1]`.
    pub fn mul_column(&mut self, x: Var, c: Var) -> Result<Var> {
        let (sx, sc) = (self.shape(x), self.shape(c));
        if sc != (sx.0, 1) {
            return Err(Error::shape("mul_column", format!("{sx:?} * {sc:?}")));
        }
        let out = self.value(x) * self.value(c);
        Ok(self.push(out, Op::MulColumn(x, c), &[x, c]))
    }

    /// `[N x d] -> [N x 1]` row sums.
    pub fn row_sum(&mut self, x: Var) -> Var {
        let out = self.value(x).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(out, Op::RowSum(x), &[x])
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(x).sum());
        self.push(out, Op::SumAll(x), &[x])
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for mut row in out.rows_mut() {
            let m = row.fold(T::neg_infinity(), |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        self.push(out, Op::SoftmaxRows(x), &[x])
    }

    /// `sum_r -log softmax(logits[r])[targets[r]]`, max-shifted for
    /// stability.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &Arc<[usize]>) -> Result<Var> {
        let (n, c) = self.shape(logits);
        if targets.len() != n {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} targets for {n} rows", targets.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::Index {
                op: "softmax_cross_entropy",
                index: bad,
                bound: c,
            });
        }
        let z = self.value(logits);
        let mut probs = Array2::zeros((n, c));
        let mut loss = T::zero();
        for (r, &t) in targets.iter().enumerate() {
            let row = z.row(r);
            let m = row.fold(T::neg_infinity(), |a, &b| a.max(b));
            let lse = row.fold(T::zero(), |a, &v| a + (v - m).exp()).ln() + m;
            loss += lse - row[t];
            Zip::from(probs.row_mut(r))
                .and(row)
                .for_each(|p, &v| *p = (v - lse).exp());
        }
        let out = Array2::from_elem((1, 1), loss);
        Ok(self.push(
            out,
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.clone(),
                probs,
            },
            &[logits],
        ))
    }

    /// `sqrt(sum_r ||pred_r - target_r||^2 / N)` against a constant target.
    pub fn rmse(&mut self, pred: Var, target: &Array2<T>) -> Result<Var> {
        let sp = self.shape(pred);
        if sp != target.dim() || sp.0 == 0 {
            return Err(Error::shape("rmse", format!("{sp:?} vs {:?}", target.dim())));
        }
        let sq = (self.value(pred) - target).mapv(|d| d * d).sum();
        let r = (sq / T::of(sp.0 as f64)).sqrt();
        let out = Array2::from_elem((1, 1), r);
        Ok(self.push(
            out,
            Op::Rmse {
                pred,
                target: target.clone(),
            },
            &[pred],
        ))
    }

    /// Batch normalization over rows. Train mode normalizes by the batch
    /// mean and biased variance and folds them into the running statistics
    /// (the running variance uses the unbiased estimate); eval mode uses the
    /// running statistics. `gamma` and `beta` are `1 x d`.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &mut BatchNormState<T>,
        mode: Mode,
    ) -> Result<Var> {
        let (n, d) = self.shape(x);
        if self.shape(gamma) != (1, d) || self.shape(beta) != (1, d) || state.dim() != d {
            return Err(Error::shape("batch_norm", format!("input width {d}")));
        }
        let xv = self.value(x);
        let (mean, var, batch_stats) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::invalid(format!(
                        "train-mode batch norm needs at least 2 rows, got {n}"
                    )));
                }
                let mean = xv.mean_axis(Axis(0)).expect("non-empty");
                let var = xv.var_axis(Axis(0), T::zero());
                let m = state.momentum;
                let unbiased = &var * T::of(n as f64 / (n - 1) as f64);
                state.running_mean = &state.running_mean * (T::one() - m) + &mean * m;
                state.running_var = &state.running_var * (T::one() - m) + &unbiased * m;
                (mean, var, true)
            }
            Mode::Eval => (state.running_mean.clone(), state.running_var.clone(), false),
        };
        let inv_std = var.mapv(|v| T::one() / (v + state.eps).sqrt());
        let xhat = (xv - &mean) * &inv_std;
        let out = &xhat * &self.value(gamma).row(0) + self.value(beta).row(0);
        Ok(self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
            &[x, gamma, beta],
        ))
    }

    /// Inverted dropout: in train mode each entry is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`. Eval mode
    /// and `p == 0` return `x` unchanged without recording anything.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("dropout ratio must lie in [0, 1), got {p}")));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let keep = T::of(1.0 / (1.0 - p));
        let mask = Array2::from_shape_simple_fn(self.shape(x), || {
            if rng.random::<f64>() < p {
                T::zero()
            } else {
                keep
            }
        });
        let out = self.value(x) * &mask;
        Ok(self.push(out, Op::Dropout { x, mask }, &[x]))
    }
}

#[inline]
pub(crate) fn softplus<T: Real>(x: T) -> T {
    // ln(1 + e^x) = max(x, 0) + ln(1 + e^-|x|)
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}
