//! Dense linear algebra on `su(N)`.
//!
//! Hermitian operators carry their spectrum, so that `e^{-itH}` and the
//! step integrals of the propagation module are evaluated exactly in the
//! eigenbasis. Generators follow the generalized Gell-Mann convention
//! `tr(G_i G_j) = 2 δ_ij`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Max-entry tolerance for Hermiticity, relative to `max(1, max |entry|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Frobenius tolerance on `U†U - I`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Relative threshold for accepting a new direction in the Lie closure.
pub const CLOSURE_TOL: f64 = 1e-9;
/// Eigenphase gap below which eigenvalues are rooted with a common branch.
pub const CLUSTER_GAP: f64 = 1e-10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Frobenius norm.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs_entry(&(m - m.adjoint()))
}

/// `(X + X†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Traceless part `X - tr(X)/N · I`.
pub fn traceless_part(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let shift = trace(m) / n as f64;
    let mut out = m.clone();
    for k in 0..n {
        out[(k, k)] -= shift;
    }
    out
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Hermitian matrix with its spectrum computed once at construction.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let deviation = hermitian_deviation(&matrix);
        if !deviation.is_finite() || deviation > HERMITIAN_TOL * max_abs_entry(&matrix).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        let matrix = hermitian_part(&matrix);
        let eig = SymmetricEigen::new(matrix.clone());
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
            matrix,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(n, n),
            eigenvalues: vec![0.0; n],
            eigenvectors: identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|z| *z == ZERO)
    }

    /// Largest |eigenvalue|.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |acc, l| acc.max(l.abs()))
    }

    /// Applies `f` to the spectrum: `V diag(f(λ)) V†`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// `e^{-itH}`. Exactly the identity for `t == 0`.
    pub fn exp_neg_i(&self, t: f64) -> UnitaryOperator {
        if t == 0.0 || self.is_zero() {
            return UnitaryOperator::identity(self.dim());
        }
        UnitaryOperator(self.spectral_map(|l| Complex64::from_polar(1.0, -t * l)))
    }
}

/// Unitary matrix, checked at construction against `U†U = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOperator(CMatrix);

impl UnitaryOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let n = check_square(&matrix)?;
        let deviation = frobenius(&(matrix.adjoint() * &matrix - identity(n)));
        if !(deviation <= UNITARY_TOL) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(matrix))
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self(matrix)
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self · other`.
    pub fn compose(&self, other: &UnitaryOperator) -> Self {
        Self(&self.0 * &other.0)
    }

    pub fn pow(&self, m: usize) -> Self {
        let mut acc = Self::identity(self.dim());
        for _ in 0..m {
            acc = acc.compose(self);
        }
        acc
    }

    pub fn determinant(&self) -> Complex64 {
        self.0.clone().determinant()
    }

    /// `U† X U`.
    pub fn conjugate(&self, x: &CMatrix) -> CMatrix {
        self.0.adjoint() * x * &self.0
    }
}

/// Ordered generalized Gell-Mann basis of `su(N)`.
#[derive(Clone, Debug)]
pub struct GeneratorBasis {
    dim: usize,
    generators: Vec<HermitianOperator>,
}

impl GeneratorBasis {
    /// Symmetric off-diagonal pairs by (row, col), then antisymmetric pairs,
    /// then the traceless diagonal ladder.
    pub fn gell_mann(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        let mut mats = Vec::with_capacity(n * n - 1);
        for j in 0..n {
            for k in j + 1..n {
                let mut m = CMatrix::zeros(n, n);
                m[(j, k)] = ONE;
                m[(k, j)] = ONE;
                mats.push(m);
            }
        }
        for j in 0..n {
            for k in j + 1..n {
                let mut m = CMatrix::zeros(n, n);
                m[(j, k)] = -I;
                m[(k, j)] = I;
                mats.push(m);
            }
        }
        for l in 1..n {
            let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
            let mut m = CMatrix::zeros(n, n);
            for k in 0..l {
                m[(k, k)] = Complex64::new(norm, 0.0);
            }
            m[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
            mats.push(m);
        }
        let generators = mats
            .into_iter()
            .map(HermitianOperator::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: n, generators })
    }

    /// Reorders the generators; `order` must be a permutation.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        for &k in order {
            if k >= self.len() || seen[k] {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            seen[k] = true;
        }
        if order.len() != self.len() {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
        Ok(Self {
            dim: self.dim,
            generators: order.iter().map(|&k| self.generators[k].clone()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[HermitianOperator] {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> &CMatrix {
        self.generators[i].matrix()
    }

    /// `Re tr(G_i X) / 2` for every generator.
    pub fn coefficients(&self, x: &CMatrix) -> Vec<f64> {
        self.generators
            .iter()
            .map(|g| {
                let g = g.matrix();
                let mut acc = 0.0;
                for a in 0..self.dim {
                    for b in 0..self.dim {
                        let gab = g[(a, b)];
                        if gab != ZERO {
                            acc += (gab * x[(b, a)]).re;
                        }
                    }
                }
                0.5 * acc
            })
            .collect()
    }

    /// `Σ c_i G_i`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (c, g) in coeffs.iter().zip(&self.generators) {
            out += g.matrix().scale(*c);
        }
        out
    }
}

/// Decomposition `X_H = Σ coeffs_i G_i + trace_part · I`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuProjection {
    pub coeffs: Vec<f64>,
    pub trace_part: Complex64,
}

pub fn project_su(x: &CMatrix, basis: &GeneratorBasis) -> Result<SuProjection> {
    let n = check_square(x)?;
    check_same_dim(basis.dim(), n)?;
    Ok(SuProjection {
        coeffs: basis.coefficients(x),
        trace_part: trace(x) / n as f64,
    })
}

/// Dimension of the real Lie algebra generated by the traceless parts of
/// `iA` and `iB`.
pub fn lie_closure_rank(a: &HermitianOperator, b: &HermitianOperator) -> Result<usize> {
    check_same_dim(a.dim(), b.dim())?;
    let basis = GeneratorBasis::gell_mann(a.dim())?;
    lie_closure_rank_with_basis(a.matrix(), b.matrix(), &basis)
}

/// Lie closure computed in the coordinates of `basis`.
///
/// Elements are kept as Hermitian traceless matrices; the bracket used is
/// `i[X, Y]`, which maps Hermitian pairs to Hermitian matrices.
pub fn lie_closure_rank_with_basis(a: &CMatrix, b: &CMatrix, basis: &GeneratorBasis) -> Result<usize> {
    let n = check_square(a)?;
    check_same_dim(n, check_square(b)?)?;
    check_same_dim(basis.dim(), n)?;

    let seeds: Vec<CMatrix> = [a, b].iter().map(|m| traceless_part(m)).collect();
    let mut span: Vec<DVector<f64>> = Vec::new();
    let mut queue: Vec<CMatrix> = Vec::new();

    // `scale` bounds the norm of `x` from its inputs, so round-off in a
    // vanishing bracket is not mistaken for a new direction.
    let try_add = |x: &CMatrix, scale: f64, span: &mut Vec<DVector<f64>>, queue: &mut Vec<CMatrix>| {
        let c = DVector::from_vec(basis.coefficients(x));
        let norm = c.norm();
        if norm <= CLOSURE_TOL * scale || !norm.is_finite() {
            return;
        }
        let mut r = c.clone();
        // Two Gram-Schmidt passes.
        for _ in 0..2 {
            for q in span.iter() {
                let d = q.dot(&r);
                r.axpy(-d, q, 1.0);
            }
        }
        let rn = r.norm();
        if rn > CLOSURE_TOL * norm {
            let q = r / rn;
            queue.push(basis.reconstruct(q.as_slice()));
            span.push(q);
        }
    };

    for s in &seeds {
        try_add(s, 0.0, &mut span, &mut queue);
    }
    let full = n * n - 1;
    let mut head = 0;
    while head < queue.len() && span.len() < full {
        let e = queue[head].clone();
        head += 1;
        let en = frobenius(&e);
        for s in &seeds {
            let br = commutator(s, &e) * I;
            try_add(&br, 2.0 * frobenius(s) * en, &mut span, &mut queue);
        }
    }
    Ok(span.len())
}

/// Eigendecomposition of a unitary, `U = Q diag(λ) Q†`.
///
/// `U` is rotated by `e^{−iα}` so that `−1` stays away from its spectrum,
/// then the Hermitian Cayley transform `C = i(I−V)(I+V)⁻¹` is diagonalized.
/// Each eigenvalue `c` of `C` corresponds to the phase `α + 2·atan(c)`.
/// Unlike QR iteration on `U`, this stays well behaved for clustered spectra.
fn unitary_eigen(u: &CMatrix) -> Result<(CMatrix, Vec<Complex64>)> {
    let n = check_square(u)?;
    let id = identity(n);
    // One of N+1 evenly spaced shifts is at least π/(N+1) from every eigenvalue.
    let mut best: Option<(f64, f64)> = None;
    for j in 0..=n {
        let alpha = PI * (2 * j + 1) as f64 / (n + 1) as f64;
        let shifted = u + &id * Complex64::from_polar(1.0, alpha);
        let smin = shifted
            .singular_values()
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x));
        if best.is_none_or(|(_, s)| smin > s) {
            best = Some((alpha, smin));
        }
    }
    let (alpha, smin) = best.expect("at least one shift");
    if !(smin > 1e-3) {
        return Err(Error::NumericFailure(format!(
            "no well-conditioned spectral shift (smallest singular value {smin:e})"
        )));
    }
    let v = u * Complex64::from_polar(1.0, -alpha);
    let inv = (&id + &v)
        .try_inverse()
        .ok_or_else(|| Error::NumericFailure("Cayley transform is singular".into()))?;
    let c = (&id - &v) * inv * I;
    let eig = SymmetricEigen::new(hermitian_part(&c));
    let q = eig.eigenvectors;
    let t = q.adjoint() * u * &q;
    let mut off = 0.0f64;
    for r in 0..n {
        for col in 0..n {
            if r != col {
                off = off.max(t[(r, col)].norm());
            }
        }
    }
    if off > 1e-8 {
        return Err(Error::NumericFailure(format!(
            "unitary not diagonalized (off-diagonal {off:e}); input is not normal"
        )));
    }
    let lambdas = eig
        .eigenvalues
        .iter()
        .map(|&c| Complex64::from_polar(1.0, alpha + 2.0 * c.atan()))
        .collect();
    Ok((q, lambdas))
}

/// Phase in (−π, π].
fn principal_phase(z: Complex64) -> f64 {
    let p = z.arg();
    if p <= -PI {
        PI
    } else {
        p
    }
}

fn wrap(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    } else if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Eigenphases in (−π, π], with members of near-degenerate clusters
/// unwrapped onto the branch of the cluster's first member. A cluster may
/// straddle the ±π cut.
fn clustered_phases(eigenvalues: &[Complex64]) -> Vec<f64> {
    let raw: Vec<f64> = eigenvalues.iter().map(|z| principal_phase(*z)).collect();
    let m = raw.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| raw[x].total_cmp(&raw[y]));

    let mut rep_of = vec![0usize; m];
    let mut rep = 0;
    for w in 0..m {
        if w > 0 && raw[order[w]] - raw[order[w - 1]] >= CLUSTER_GAP {
            rep = w;
        }
        rep_of[w] = rep;
    }
    if m > 1 && raw[order[0]] + 2.0 * PI - raw[order[m - 1]] < CLUSTER_GAP {
        let last = rep_of[m - 1];
        if last != 0 {
            rep_of.iter_mut().filter(|r| **r == 0).for_each(|r| *r = last);
        }
    }

    let mut out = raw.clone();
    for w in 0..m {
        let r = raw[order[rep_of[w]]];
        out[order[w]] = r + wrap(raw[order[w]] - r);
    }
    out
}

/// Principal `m`-th root: eigenphases in (−π, π] divided by `m`.
pub fn principal_root(u: &UnitaryOperator, m: usize) -> Result<UnitaryOperator> {
    if m == 0 {
        return Err(Error::InvalidArgument("root order must be >= 1".into()));
    }
    if m == 1 {
        return Ok(u.clone());
    }
    let (q, lambdas) = unitary_eigen(u.matrix())?;
    let phases = clustered_phases(&lambdas);
    let mut scaled = q.clone();
    for (j, phi) in phases.iter().enumerate() {
        let w = Complex64::from_polar(1.0, phi / m as f64);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
    }
    Ok(UnitaryOperator(scaled * q.adjoint()))
}

/// Hermitian `X` with `U = e^{iX}` and spectrum in (−π, π].
pub fn principal_log_hermitian(u: &UnitaryOperator) -> Result<CMatrix> {
    let (q, lambdas) = unitary_eigen(u.matrix())?;
    let mut scaled = q.clone();
    for (j, z) in lambdas.iter().enumerate() {
        let w = Complex64::new(principal_phase(*z), 0.0);
        scaled.column_mut(j).iter_mut().for_each(|c| *c *= w);
    }
    Ok(hermitian_part(&(scaled * q.adjoint())))
}

/// `e^{-iθ/N} U` with `θ = arg det U`, so the result lies in `SU(N)`.
pub fn fix_det_su(u: &UnitaryOperator) -> UnitaryOperator {
    let theta = u.determinant().arg();
    let n = u.dim() as f64;
    // Already in SU(N) up to round-off: keep the input bit-for-bit.
    if theta.abs() <= 16.0 * f64::EPSILON * n {
        return u.clone();
    }
    UnitaryOperator(u.matrix() * Complex64::from_polar(1.0, -theta / n))
}

/// `min_φ ‖U − e^{iφ}V‖_F`, equal to `sqrt(2N − 2|tr(U†V)|)` for unitaries.
///
/// Evaluated at the optimal phase rather than through the trace formula, so
/// identical inputs give exactly zero.
pub fn phase_invariant_distance(u: &UnitaryOperator, v: &UnitaryOperator) -> Result<f64> {
    check_same_dim(u.dim(), v.dim())?;
    let (um, vm) = (u.matrix(), v.matrix());
    let overlap: Complex64 = vm.iter().zip(um.iter()).map(|(b, a)| b.conj() * a).sum();
    let phase = if overlap == ZERO {
        ONE
    } else {
        Complex64::from_polar(1.0, overlap.arg())
    };
    Ok(um
        .iter()
        .zip(vm.iter())
        .map(|(a, b)| (a - phase * b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}
