//! Reference implementations that share no numerical code with the library:
//! Padé exponentials instead of eigendecompositions, and quadrature instead
//! of closed-form step integrals.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use safegate_core::propagation::{ControlSystem, PulseSequence, StepLabel};
use safegate_core::CMatrix;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^X` by scaling and squaring with a degree-8 diagonal Padé approximant.
pub fn expm(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    let norm = one_norm(x);
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let a = x.unscale(2f64.powi(s));
    // Padé [8/8] coefficients c_k = (2q−k)! q! / ((2q)! k! (q−k)!).
    let q = 8usize;
    let mut coef = vec![1.0f64; q + 1];
    for k in 1..=q {
        coef[k] = coef[k - 1] * (q + 1 - k) as f64 / (k * (2 * q + 1 - k)) as f64;
    }
    let id = CMatrix::identity(n, n);
    let mut num = id.clone();
    let mut den = id.clone();
    let mut p = id.clone();
    for (k, ck) in coef.iter().enumerate().skip(1) {
        p = &p * &a;
        num += &p * c(*ck, 0.0);
        den += &p * c(if k % 2 == 0 { *ck } else { -*ck }, 0.0);
    }
    let mut r = den.lu().solve(&num).expect("Padé denominator is invertible");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `e^{−itH}`.
pub fn exp_neg_i(h: &CMatrix, t: f64) -> CMatrix {
    expm(&(h * c(0.0, -t)))
}

fn hamiltonian(sys: &ControlSystem, label: StepLabel) -> CMatrix {
    match label {
        StepLabel::A => sys.a().matrix().clone(),
        StepLabel::B => sys.b().matrix().clone(),
        StepLabel::Idle => CMatrix::zeros(sys.dim(), sys.dim()),
    }
}

/// Noiseless (or noisy, with `noise`) final unitary, step by step.
pub fn propagate_pade(seq: &PulseSequence, sys: &ControlSystem, noise: Option<&CMatrix>) -> CMatrix {
    let n = sys.dim();
    let zero = CMatrix::zeros(n, n);
    let v = noise.unwrap_or(&zero);
    let mut u = CMatrix::identity(n, n);
    for s in seq.steps() {
        u = exp_neg_i(&(hamiltonian(sys, s.label) + v), s.duration) * u;
        if s.wait > 0.0 && noise.is_some() {
            u = exp_neg_i(v, s.wait) * u;
        }
    }
    u
}

/// Control unitary sampled at `2m + 1` equally spaced nodes of each step.
/// Waits are returned separately with their constant prefix.
pub struct Samples {
    /// Per step: node spacing and the unitaries at the nodes.
    pub steps: Vec<(f64, Vec<CMatrix>)>,
    pub waits: Vec<(f64, CMatrix)>,
}

pub fn sample(seq: &PulseSequence, sys: &ControlSystem, panels: usize) -> Samples {
    let n = sys.dim();
    let mut u = CMatrix::identity(n, n);
    let mut steps = Vec::new();
    let mut waits = Vec::new();
    for s in seq.steps() {
        let h = s.duration / (2 * panels) as f64;
        let e = exp_neg_i(&hamiltonian(sys, s.label), h);
        let mut nodes = Vec::with_capacity(2 * panels + 1);
        let mut cur = u.clone();
        nodes.push(cur.clone());
        for _ in 0..2 * panels {
            cur = &e * &cur;
            nodes.push(cur.clone());
        }
        // Restart from an accurate product to avoid drift across steps.
        u = exp_neg_i(&hamiltonian(sys, s.label), s.duration) * u;
        steps.push((h, nodes));
        waits.push((s.wait, u.clone()));
    }
    Samples { steps, waits }
}

fn simpson_weight(j: usize, last: usize) -> f64 {
    if j == 0 || j == last {
        1.0
    } else if j % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// `∫U_c†XU_c ds` by composite Simpson on every step (`panels` per step).
pub fn first_order_simpson(seq: &PulseSequence, sys: &ControlSystem, ops: &[CMatrix], panels: usize) -> Vec<CMatrix> {
    let smp = sample(seq, sys, panels);
    let n = sys.dim();
    ops.iter()
        .map(|x| {
            let mut acc = CMatrix::zeros(n, n);
            for (h, nodes) in &smp.steps {
                let last = nodes.len() - 1;
                for (j, u) in nodes.iter().enumerate() {
                    acc += (u.adjoint() * x * u) * c(simpson_weight(j, last) * h / 3.0, 0.0);
                }
            }
            for (w, u) in &smp.waits {
                acc += (u.adjoint() * x * u) * c(*w, 0.0);
            }
            acc
        })
        .collect()
}

/// `∫₀^T dt ∫₀^t ds U†(t)G_mU(t) U†(s)G_nU(s)` by nested quadrature: the
/// inner integral is accumulated node by node (Simpson over full panels, a
/// three-point rule over the first half of a panel), the outer by Simpson.
pub fn second_order_simpson(seq: &PulseSequence, sys: &ControlSystem, gm: &CMatrix, gn: &CMatrix, panels: usize) -> CMatrix {
    let smp = sample(seq, sys, panels);
    let n = sys.dim();
    let mut inner = CMatrix::zeros(n, n);
    let mut outer = CMatrix::zeros(n, n);
    for ((h, nodes), (w, uw)) in smp.steps.iter().zip(&smp.waits) {
        let fm: Vec<CMatrix> = nodes.iter().map(|u| u.adjoint() * gm * u).collect();
        let fnn: Vec<CMatrix> = nodes.iter().map(|u| u.adjoint() * gn * u).collect();
        let last = nodes.len() - 1;
        let mut running = Vec::with_capacity(nodes.len());
        running.push(inner.clone());
        let mut base = inner.clone();
        for p in 0..panels {
            let (f0, f1, f2) = (&fnn[2 * p], &fnn[2 * p + 1], &fnn[2 * p + 2]);
            let half = (f0 * c(5.0, 0.0) + f1 * c(8.0, 0.0) - f2) * c(h / 12.0, 0.0);
            let full = (f0 + f1 * c(4.0, 0.0) + f2) * c(h / 3.0, 0.0);
            running.push(&base + half);
            base += full;
            running.push(base.clone());
        }
        for j in 0..=last {
            outer += (&fm[j] * &running[j]) * c(simpson_weight(j, last) * h / 3.0, 0.0);
        }
        inner = base;
        // Constant integrands over the wait: exact.
        let pm = uw.adjoint() * gm * uw;
        let pn = uw.adjoint() * gn * uw;
        outer += (&pm * &inner) * c(*w, 0.0) + (&pm * &pn) * c(w * w / 2.0, 0.0);
        inner += pn * c(*w, 0.0);
    }
    outer
}

/// `min ‖Fx − b‖` over `x ≥ 0` by enumerating every support and solving the
/// unconstrained problem on it. Exponential in the column count.
pub fn nnls_exhaustive(f: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let ncols = f.ncols();
    assert!(ncols <= 16, "exhaustive search is for small problems");
    let mut best = (DVector::zeros(ncols), b.norm());
    for mask in 1u32..(1 << ncols) {
        let idx: Vec<usize> = (0..ncols).filter(|&j| mask & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(f.nrows(), idx.len(), |r, k| f[(r, idx[k])]);
        let Ok(sol) = sub.clone().svd(true, true).solve(b, 1e-12) else { continue };
        if sol.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = DVector::zeros(ncols);
        for (k, &j) in idx.iter().enumerate() {
            x[j] = sol[k];
        }
        let r = (f * &x - b).norm();
        if r < best.1 - 1e-14 {
            best = (x, r);
        }
    }
    best
}

/// Realified Frobenius rank of a set of matrices.
pub fn matrix_rank(ms: &[CMatrix], rtol: f64) -> usize {
    if ms.is_empty() {
        return 0;
    }
    let rows = 2 * ms[0].len();
    let a = DMatrix::from_fn(rows, ms.len(), |r, k| {
        let z = ms[k][r / 2];
        if r % 2 == 0 { z.re } else { z.im }
    });
    let sv = a.svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |m, &x| m.max(x));
    sv.iter().filter(|&&x| x > rtol * smax).count()
}
