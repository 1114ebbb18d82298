use ndarray::Array2;
use serde::Serialize;

use super::{Tape, Var};
use crate::error::Result;
use crate::real::Real;

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// `(parameter index, row-major element index)` of the worst coordinate.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// One checked coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coordinate {
    pub param: usize,
    /// Row-major element index.
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl Coordinate {
    /// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub fn rel_err(&self) -> f64 {
        let denom = self.analytic.abs().max(self.numeric.abs()).max(1e-8);
        (self.analytic - self.numeric).abs() / denom
    }
}

impl GradCheck {
    /// Summary of the worst coordinate in `coords`.
    pub fn summarize<'a>(coords: impl IntoIterator<Item = &'a Coordinate>) -> Self {
        let mut report = GradCheck {
            max_rel_err: 0.0,
            worst: (0, 0),
            analytic: 0.0,
            numeric: 0.0,
            coordinates: 0,
        };
        for c in coords {
            report.coordinates += 1;
            let err = c.rel_err();
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = (c.param, c.index);
                report.analytic = c.analytic;
                report.numeric = c.numeric;
            }
        }
        report
    }
}

/// Compares reverse-mode gradients of `loss` against central differences
/// `(f(p + h) - f(p - h)) / 2h`, one coordinate at a time, and reports the
/// worst relative error (see [`Coordinate::rel_err`]).
///
/// `loss` receives a fresh tape and one leaf per entry of `params` and must
/// return the scalar loss. It is called `1 + 2 * coordinates` times and must
/// be deterministic (reseed any dropout generator inside the closure).
pub fn finite_difference_check<T, F>(params: &[Array2<T>], h: T, loss: F) -> Result<GradCheck>
where
    T: Real,
    F: FnMut(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    Ok(GradCheck::summarize(&finite_difference_coordinates(params, h, loss)?))
}

/// Every coordinate of [`finite_difference_check`], in parameter order.
pub fn finite_difference_coordinates<T, F>(params: &[Array2<T>], h: T, mut loss: F) -> Result<Vec<Coordinate>>
where
    T: Real,
    F: FnMut(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let mut eval = |values: &[Array2<T>], with_grad: bool| -> Result<(T, Vec<Array2<T>>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.param(v.clone())).collect();
        let l = loss(&mut tape, &vars)?;
        let value = tape.item(l);
        if !with_grad {
            return Ok((value, Vec::new()));
        }
        let grads = tape.backward(l)?;
        let g = vars
            .iter()
            .zip(values)
            .map(|(v, p)| grads.wrt(*v, p.dim()))
            .collect();
        Ok((value, g))
    };

    let (_, analytic) = eval(params, true)?;
    let mut work: Vec<Array2<T>> = params.to_vec();
    let mut out = Vec::new();
    let two_h = (h + h).to_f64_lossy();
    for p in 0..params.len() {
        let cols = params[p].ncols();
        for i in 0..params[p].len() {
            let at = (i / cols, i % cols);
            let orig = params[p][at];
            work[p][at] = orig + h;
            let (up, _) = eval(&work, false)?;
            work[p][at] = orig - h;
            let (down, _) = eval(&work, false)?;
            work[p][at] = orig;
            out.push(Coordinate {
                param: p,
                index: i,
                analytic: analytic[p][at].to_f64_lossy(),
                numeric: (up.to_f64_lossy() - down.to_f64_lossy()) / two_h,
            });
        }
    }
    Ok(out)
}
