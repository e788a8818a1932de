//! Nonnegative solutions of `Fx = b`.
//!
//! `min Σx` subject to `Fx = b, x ≥ 0` goes to a simplex solver after the
//! rows are reduced to the column space of `F`; the vertex it returns is then
//! refined by least squares on its support. Lawson-Hanson NNLS gives the best
//! nonnegative fit when the LP has no solution.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for the column space of `F`.
const RANK_RTOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// `b = 0`; the zero vector is optimal.
    Trivial,
    LinearProgram,
    Nnls,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Trivial => "trivial",
            Method::LinearProgram => "linear-program",
            Method::Nnls => "nnls",
        }
    }
}

#[derive(Clone, Debug)]
pub struct NonnegSolution {
    pub x: DVector<f64>,
    /// `‖Fx − b‖₂`.
    pub residual: f64,
    pub method: Method,
}

fn residual_norm(f: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (f * x - b).norm()
}

/// Least squares via SVD with a relative cutoff.
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    svd.solve(b, RANK_RTOL * smax.max(f64::MIN_POSITIVE))
        .expect("singular vectors requested")
}

fn columns(f: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(f.nrows(), idx.len(), |r, c| f[(r, idx[c])])
}

/// Lawson-Hanson active-set NNLS: `min ‖Fx − b‖₂` over `x ≥ 0`.
pub fn nnls(f: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = f.shape();
    assert_eq!(m, b.len(), "row count of F must match b");
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let norm1 = (0..n).map(|j| f.column(j).abs().sum()).fold(0.0, f64::max);
    let tol = 10.0 * f64::EPSILON * norm1 * m.max(n) as f64 * b.norm().max(1.0);
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = f.transpose() * (b - f * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let p: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let zp = lstsq(&columns(f, &p), b);
            if zp.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &idx) in p.iter().enumerate() {
                    x[idx] = zp[k];
                }
                break;
            }
            // Step toward z until the first passive entry hits zero.
            let mut alpha = f64::INFINITY;
            for (k, &idx) in p.iter().enumerate() {
                if zp[k] <= 0.0 {
                    let denom = x[idx] - zp[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[idx] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &idx) in p.iter().enumerate() {
                x[idx] += alpha * (zp[k] - x[idx]);
            }
            let mut dropped = false;
            for &idx in &p {
                if x[idx] <= tol.max(f64::MIN_POSITIVE) {
                    x[idx] = 0.0;
                    passive[idx] = false;
                    dropped = true;
                }
            }
            if !dropped || !passive.iter().any(|&q| q) {
                break;
            }
        }
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    x
}

/// Rows of `F` and `b` expressed in an orthonormal basis of the column space
/// of `F`, plus the norm of the part of `b` outside it.
fn reduce_rows(f: &DMatrix<f64>, b: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, f64) {
    let svd = f.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > RANK_RTOL * smax)
        .collect();
    let ur = columns(&u, &keep);
    let fb = ur.transpose() * f;
    let bb = ur.transpose() * b;
    let outside = (b - &ur * &bb).norm();
    (fb, bb, outside)
}

fn linear_program(f: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = b.amax();
    if scale == 0.0 {
        return Some(DVector::zeros(f.ncols()));
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..f.ncols()).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for r in 0..f.nrows() {
        let terms: Vec<_> = vars
            .iter()
            .enumerate()
            .filter(|(c, _)| f[(r, *c)] != 0.0)
            .map(|(c, &v)| (v, f[(r, c)]))
            .collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, b[r] / scale);
    }
    let sol = lp.solve().ok()?.into_solution().ok()?;
    Some(DVector::from_iterator(
        vars.len(),
        vars.iter().map(|&v| sol.var_value(v).max(0.0) * scale),
    ))
}

/// Newton-type refinement of `Fx = b` on the support of `x`, falling back to
/// NNLS on that support if a correction turns an entry negative.
fn polish(f: &DMatrix<f64>, b: &DVector<f64>, x: DVector<f64>) -> DVector<f64> {
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] > 0.0).collect();
    if support.is_empty() {
        return x;
    }
    let fs = columns(f, &support);
    let mut best = x.clone();
    let mut best_res = residual_norm(f, &x, b);
    let mut xs = DVector::from_iterator(support.len(), support.iter().map(|&j| x[j]));
    for _ in 0..3 {
        let delta = lstsq(&fs, &(b - &fs * &xs));
        let next = &xs + delta;
        let next = if next.iter().all(|&v| v >= 0.0) { next } else { nnls(&fs, b) };
        let mut full = DVector::zeros(x.len());
        for (k, &j) in support.iter().enumerate() {
            full[j] = next[k];
        }
        let res = residual_norm(f, &full, b);
        if res < best_res {
            best = full;
            best_res = res;
            xs = next;
        } else {
            break;
        }
    }
    best
}

/// Nonnegative `x` with `Fx = b`, minimizing `Σx` when the LP succeeds.
///
/// Succeeds iff `‖Fx − b‖₂ ≤ tol·‖b‖₂`; otherwise returns
/// `ProtectionFailure` carrying the best residual found.
pub fn solve_nonneg(f: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<NonnegSolution> {
    if f.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: f.nrows(),
            found: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(NonnegSolution {
            x: DVector::zeros(f.ncols()),
            residual: 0.0,
            method: Method::Trivial,
        });
    }
    let accept = tol * bnorm;
    if f.ncols() == 0 {
        return Err(Error::ProtectionFailure {
            residual: bnorm,
            relative: 1.0,
        });
    }

    let (fr, br, outside) = reduce_rows(f, b);
    if outside <= accept {
        if let Some(x) = linear_program(&fr, &br) {
            let x = polish(f, b, x);
            let residual = residual_norm(f, &x, b);
            if residual <= accept {
                return Ok(NonnegSolution {
                    x,
                    residual,
                    method: Method::LinearProgram,
                });
            }
        }
    }

    let x = nnls(f, b);
    let x = polish(f, b, x);
    let residual = residual_norm(f, &x, b);
    if residual <= accept {
        Ok(NonnegSolution {
            x,
            residual,
            method: Method::Nnls,
        })
    } else {
        Err(Error::ProtectionFailure {
            residual,
            relative: residual / bnorm,
        })
    }
}

/// Best nonnegative least-squares fit, without the success test.
pub fn best_fit(f: &DMatrix<f64>, b: &DVector<f64>) -> NonnegSolution {
    let x = polish(f, b, nnls(f, b));
    NonnegSolution {
        residual: residual_norm(f, &x, b),
        x,
        method: Method::Nnls,
    }
}
