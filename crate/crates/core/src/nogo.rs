//! Uncorrectable noise directions of purely two-valued control.
//!
//! For `C_n = ½[A+B, (B−A)ⁿ]` every step Hamiltonian satisfies
//! `[H, (B−A)ⁿ] = C_n`, so the first-order integral of `C_n` telescopes to
//! `−i(U†(B−A)ⁿU − (B−A)ⁿ)` with `U` the final control unitary, whatever the
//! timings. It vanishes only if `U` commutes with every power of `B−A`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{commutator, frobenius, CMatrix, I};
use crate::error::{Error, Result};
use crate::propagation::{first_order_integrals, propagate, ControlSystem, PulseSequence};

/// Relative singular-value cutoff for the span of `{iC_n}`.
pub const RANK_TOL: f64 = 1e-9;

fn difference(sys: &ControlSystem) -> CMatrix {
    sys.b().matrix() - sys.a().matrix()
}

fn sum(sys: &ControlSystem) -> CMatrix {
    sys.a().matrix() + sys.b().matrix()
}

/// `(B−A)ⁿ` for `n = 1..=max_n`.
fn difference_powers(sys: &ControlSystem, max_n: usize) -> Vec<CMatrix> {
    let d = difference(sys);
    let mut out = Vec::with_capacity(max_n);
    let mut p = d.clone();
    for _ in 0..max_n {
        out.push(p.clone());
        p = &p * &d;
    }
    out
}

/// `C_1 … C_max_n`, each anti-Hermitian. Requires `max_n >= N`.
pub fn uncorrectable_operators(sys: &ControlSystem, max_n: usize) -> Result<Vec<CMatrix>> {
    if max_n < sys.dim() {
        return Err(Error::InvalidArgument(format!(
            "max_n must be >= N = {}, got {max_n}",
            sys.dim()
        )));
    }
    let s = sum(sys);
    Ok(difference_powers(sys, max_n)
        .iter()
        .map(|p| commutator(&s, p).scale(0.5))
        .collect())
}

/// Orthonormal (Frobenius) Hermitian basis of the span of `{iC_n : n ≤ N}`.
#[derive(Clone, Debug)]
pub struct UncorrectableSubspace {
    pub dimension: usize,
    pub basis: Vec<CMatrix>,
}

fn realify(m: &CMatrix) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn unrealify(v: &[f64], n: usize) -> CMatrix {
    CMatrix::from_iterator(n, n, v.chunks(2).map(|c| Complex64::new(c[0], c[1])))
}

pub fn uncorrectable_subspace(sys: &ControlSystem) -> Result<UncorrectableSubspace> {
    let n = sys.dim();
    let d = difference(sys);
    if frobenius(&d) == 0.0 {
        return Err(Error::DegenerateInput("A = B: no noise directions are defined".into()));
    }
    let s = sum(sys);
    // Normalized powers keep the columns on a common scale.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut p = d.clone();
    for _ in 0..n {
        let pn = frobenius(&p);
        if pn > 0.0 {
            let unit = p.unscale(pn);
            cols.push(realify(&(commutator(&s, &unit).scale(0.5) * I)));
            p = &unit * &d;
        } else {
            break;
        }
    }
    let rows = 2 * n * n;
    let mat = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    let svd = mat.svd(true, false);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &x| a.max(x));
    let u = svd.u.expect("left singular vectors requested");
    let mut basis = Vec::new();
    if smax > 0.0 {
        for (k, &sv) in svd.singular_values.iter().enumerate() {
            if sv > RANK_TOL * smax {
                let col: Vec<f64> = u.column(k).iter().copied().collect();
                basis.push(unrealify(&col, n));
            }
        }
    }
    if basis.is_empty() {
        return Err(Error::DegenerateInput(
            "A and B commute: every C_n vanishes".into(),
        ));
    }
    Ok(UncorrectableSubspace {
        dimension: basis.len(),
        basis,
    })
}

/// Dimension `D` of the uncorrectable subspace.
pub fn uncorrectable_dimension(sys: &ControlSystem) -> Result<usize> {
    Ok(uncorrectable_subspace(sys)?.dimension)
}

/// Timing-independent first-order integral of `C_n`:
/// `−i(U†(B−A)ⁿU − (B−A)ⁿ)`.
pub fn closed_form(sys: &ControlSystem, final_unitary: &crate::algebra::UnitaryOperator, n: usize) -> CMatrix {
    let powers = difference_powers(sys, n);
    let p = &powers[n - 1];
    (final_unitary.conjugate(p) - p) * Complex64::new(0.0, -1.0)
}

fn require_two_valued(seq: &PulseSequence) -> Result<()> {
    if seq.has_waits() {
        return Err(Error::Precondition(
            "closed form holds only for sequences without waits".into(),
        ));
    }
    if !seq.is_alternating() {
        return Err(Error::Precondition(
            "closed form needs a strictly alternating B, A, … sequence".into(),
        ));
    }
    Ok(())
}

/// Per-`n` residuals `‖∫U†C_nU − closed_form(n)‖_F` for `n = 1..=N`.
pub fn closed_form_residuals(seq: &PulseSequence, sys: &ControlSystem) -> Result<Vec<f64>> {
    require_two_valued(seq)?;
    let ops = uncorrectable_operators(sys, sys.dim())?;
    let integrals = first_order_integrals(seq, sys, &ops)?;
    let u = propagate(seq, sys)?.final_unitary;
    Ok(integrals
        .iter()
        .enumerate()
        .map(|(k, g)| frobenius(&(g - closed_form(sys, &u, k + 1))))
        .collect())
}

/// Max over `n ≤ N` of the closed-form residual.
pub fn verify_closed_form(seq: &PulseSequence, sys: &ControlSystem) -> Result<f64> {
    Ok(closed_form_residuals(seq, sys)?.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct NoGoReport {
    pub dimension: usize,
    pub hermitized_basis: Vec<CMatrix>,
    pub closed_form_residual: f64,
    /// `‖closed_form(n)‖_F` for `n = 1..=N`.
    pub closed_form_norms: Vec<f64>,
    /// Some closed form is nonzero for this final gate.
    pub target_dependent: bool,
}

impl NoGoReport {
    pub fn analyze(seq: &PulseSequence, sys: &ControlSystem) -> Result<Self> {
        let subspace = uncorrectable_subspace(sys)?;
        let residuals = closed_form_residuals(seq, sys)?;
        let u = propagate(seq, sys)?.final_unitary;
        let norms: Vec<f64> = (1..=sys.dim()).map(|n| frobenius(&closed_form(sys, &u, n))).collect();
        let scale = difference_powers(sys, sys.dim())
            .iter()
            .map(frobenius)
            .fold(1.0, f64::max);
        let target_dependent = norms.iter().any(|&x| x > 1e-8 * scale);
        Ok(Self {
            dimension: subspace.dimension,
            hermitized_basis: subspace.basis,
            closed_form_residual: residuals.into_iter().fold(0.0, f64::max),
            closed_form_norms: norms,
            target_dependent,
        })
    }
}
