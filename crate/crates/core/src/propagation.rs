//! Piecewise-constant evolution and exact first-order noise integrals.
//!
//! A sequence is a list of steps, each holding the control at `A`, `B` or
//! zero for `duration`, followed by `wait` of zero control. The first-order
//! quantity for an operator `X` is `∫ U_c†(s) X U_c(s) ds` over the whole
//! schedule, evaluated step by step in the eigenbasis of the step
//! Hamiltonian, so there is no time discretization.

use std::fmt;

use num_complex::Complex64;

use crate::algebra::{
    frobenius, lie_closure_rank, phase_invariant_distance, CMatrix, GeneratorBasis,
    HermitianOperator, UnitaryOperator, ZERO,
};
use crate::error::{Error, Result};

/// Eigenvalue gaps at or below this use the `T` limit of the step integral.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// The two control values together with the `su(N)` basis used for noise.
#[derive(Clone, Debug)]
pub struct ControlSystem {
    a: HermitianOperator,
    b: HermitianOperator,
    basis: GeneratorBasis,
    closure_rank: usize,
}

impl ControlSystem {
    pub fn new(a: HermitianOperator, b: HermitianOperator) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        let basis = GeneratorBasis::gell_mann(a.dim())?;
        let closure_rank = lie_closure_rank(&a, &b)?;
        Ok(Self {
            a,
            b,
            basis,
            closure_rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn a(&self) -> &HermitianOperator {
        &self.a
    }

    pub fn b(&self) -> &HermitianOperator {
        &self.b
    }

    pub fn basis(&self) -> &GeneratorBasis {
        &self.basis
    }

    pub fn closure_rank(&self) -> usize {
        self.closure_rank
    }

    pub fn is_bracket_generating(&self) -> bool {
        self.closure_rank == self.basis.len()
    }

    pub fn hamiltonian(&self, label: StepLabel) -> Option<&HermitianOperator> {
        match label {
            StepLabel::A => Some(&self.a),
            StepLabel::B => Some(&self.b),
            StepLabel::Idle => None,
        }
    }

    /// Largest spectral norm of the two controls.
    pub fn control_scale(&self) -> f64 {
        self.a.spectral_norm().max(self.b.spectral_norm())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepLabel {
    A,
    B,
    Idle,
}

impl StepLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StepLabel::A => "A",
            StepLabel::B => "B",
            StepLabel::Idle => "idle",
        }
    }

    /// Label of step `k` (0-based) in an alternating sequence that starts with `B`.
    pub fn alternating(k: usize) -> Self {
        if k % 2 == 0 {
            StepLabel::B
        } else {
            StepLabel::A
        }
    }
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StepLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(StepLabel::A),
            "B" => Ok(StepLabel::B),
            "idle" => Ok(StepLabel::Idle),
            other => Err(Error::InvalidArgument(format!("unknown step label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseStep {
    pub label: StepLabel,
    pub duration: f64,
    pub wait: f64,
}

impl PulseStep {
    pub fn new(label: StepLabel, duration: f64, wait: f64) -> Self {
        Self { label, duration, wait }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    dim: usize,
    steps: Vec<PulseStep>,
    alternating: bool,
}

impl PulseSequence {
    pub fn new(dim: usize, steps: Vec<PulseStep>) -> Result<Self> {
        for (k, s) in steps.iter().enumerate() {
            if !(s.duration >= 0.0) || !s.duration.is_finite() {
                return Err(Error::Precondition(format!(
                    "step {k}: duration must be finite and >= 0, got {}",
                    s.duration
                )));
            }
            if !(s.wait >= 0.0) || !s.wait.is_finite() {
                return Err(Error::Precondition(format!(
                    "step {k}: wait must be finite and >= 0, got {}",
                    s.wait
                )));
            }
        }
        let alternating = steps
            .iter()
            .enumerate()
            .all(|(k, s)| s.label == StepLabel::alternating(k));
        Ok(Self {
            dim,
            steps,
            alternating,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            steps: Vec::new(),
            alternating: true,
        }
    }

    /// `B, A, B, …` with the given durations and no waits.
    pub fn alternating(dim: usize, timings: &[f64]) -> Result<Self> {
        Self::new(
            dim,
            timings
                .iter()
                .enumerate()
                .map(|(k, &t)| PulseStep::new(StepLabel::alternating(k), t, 0.0))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> &[PulseStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Labels strictly alternate `B, A, B, …`.
    pub fn is_alternating(&self) -> bool {
        self.alternating
    }

    pub fn has_waits(&self) -> bool {
        self.steps.iter().any(|s| s.wait > 0.0)
    }

    /// Alternating with no waits: the premise of the no-go closed form.
    pub fn is_two_valued(&self) -> bool {
        self.alternating && !self.has_waits()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.duration).collect()
    }

    pub fn waits(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.wait).collect()
    }

    pub fn total_duration(&self) -> f64 {
        self.steps.iter().map(|s| s.duration + s.wait).sum()
    }

    /// Time spent with the control at `A` or `B`.
    pub fn control_duration(&self) -> f64 {
        self.steps
            .iter()
            .filter(|s| s.label != StepLabel::Idle)
            .map(|s| s.duration)
            .sum()
    }

    /// Time spent with zero control (waits and idle steps).
    pub fn idle_duration(&self) -> f64 {
        self.total_duration() - self.control_duration()
    }

    /// Copy with `waits[k]` added to the wait of step `k`.
    pub fn with_added_waits(&self, waits: &[f64]) -> Result<Self> {
        if waits.len() != self.steps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.steps.len(),
                found: waits.len(),
            });
        }
        let steps = self
            .steps
            .iter()
            .zip(waits)
            .map(|(s, w)| PulseStep::new(s.label, s.duration, s.wait + w))
            .collect();
        Self::new(self.dim, steps)
    }

    pub fn without_waits(&self) -> Self {
        let steps = self
            .steps
            .iter()
            .map(|s| PulseStep::new(s.label, s.duration, 0.0))
            .collect();
        Self::new(self.dim, steps).expect("waits removed from a valid sequence")
    }

    /// `reps` back-to-back copies.
    pub fn repeated(&self, reps: usize) -> Self {
        let steps = (0..reps).flat_map(|_| self.steps.iter().copied()).collect();
        Self::new(self.dim, steps).expect("copies of a valid sequence")
    }

    pub fn concat(&self, other: &PulseSequence) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let steps = self.steps.iter().chain(&other.steps).copied().collect();
        Self::new(self.dim, steps)
    }

    /// Each step cut into `parts` equal sub-steps; the step's wait goes to
    /// the last piece.
    pub fn split_steps(&self, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(Error::InvalidArgument("parts must be >= 1".into()));
        }
        let mut steps = Vec::with_capacity(self.steps.len() * parts);
        for s in &self.steps {
            let piece = s.duration / parts as f64;
            for p in 0..parts {
                let wait = if p + 1 == parts { s.wait } else { 0.0 };
                steps.push(PulseStep::new(s.label, piece, wait));
            }
        }
        Self::new(self.dim, steps)
    }
}

fn check_dims(seq: &PulseSequence, sys: &ControlSystem) -> Result<()> {
    if seq.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: seq.dim(),
        });
    }
    Ok(())
}

/// Result of noiseless propagation; `prefixes[n]` is the control unitary at
/// the end of step `n` (`prefixes[0] = I`).
#[derive(Clone, Debug)]
pub struct Propagation {
    pub final_unitary: UnitaryOperator,
    pub prefixes: Vec<UnitaryOperator>,
}

/// Shared evolution loop for noiseless and noisy propagation, so that a zero
/// noise reproduces the noiseless result bit for bit.
fn evolve(
    seq: &PulseSequence,
    sys: &ControlSystem,
    noise: Option<&HermitianOperator>,
    mut on_step: impl FnMut(&UnitaryOperator),
) -> Result<UnitaryOperator> {
    check_dims(seq, sys)?;
    let n = sys.dim();
    let noise = noise.filter(|h| !h.is_zero());
    let mut u = UnitaryOperator::identity(n);
    let shifted = |h: &HermitianOperator| -> Result<HermitianOperator> {
        match noise {
            Some(e) => HermitianOperator::new(h.matrix() + e.matrix()),
            None => Ok(h.clone()),
        }
    };
    let (a, b) = (shifted(sys.a())?, shifted(sys.b())?);
    let idle = noise.cloned().unwrap_or_else(|| HermitianOperator::zero(n));
    for step in seq.steps() {
        let h = match step.label {
            StepLabel::A => &a,
            StepLabel::B => &b,
            StepLabel::Idle => &idle,
        };
        if step.duration > 0.0 {
            u = h.exp_neg_i(step.duration).compose(&u);
        }
        if step.wait > 0.0 && noise.is_some() {
            u = idle.exp_neg_i(step.wait).compose(&u);
        }
        on_step(&u);
    }
    Ok(u)
}

pub fn propagate(seq: &PulseSequence, sys: &ControlSystem) -> Result<Propagation> {
    let mut prefixes = Vec::with_capacity(seq.len() + 1);
    prefixes.push(UnitaryOperator::identity(sys.dim()));
    let final_unitary = evolve(seq, sys, None, |u| prefixes.push(u.clone()))?;
    Ok(Propagation {
        final_unitary,
        prefixes,
    })
}

/// `∫₀^T e^{+isH} G e^{−isH} ds`, evaluated in the eigenbasis of `H`.
pub fn step_integral(h: &HermitianOperator, g: &CMatrix, t: f64) -> CMatrix {
    if t == 0.0 {
        return CMatrix::zeros(g.nrows(), g.ncols());
    }
    if h.is_zero() {
        return g.scale(t);
    }
    let v = h.eigenvectors();
    let lambda = h.eigenvalues();
    let mut rotated = v.adjoint() * g * v;
    for a in 0..rotated.nrows() {
        for b in 0..rotated.ncols() {
            let d = lambda[a] - lambda[b];
            let weight = if d.abs() <= DEGENERATE_GAP {
                Complex64::new(t, 0.0)
            } else {
                // (e^{iTd} - 1) / (i d)
                let (s, c) = (t * d).sin_cos();
                Complex64::new(s / d, (1.0 - c) / d)
            };
            rotated[(a, b)] *= weight;
        }
    }
    v * rotated * v.adjoint()
}

/// First-order integrals `∫ U_c†(s) X U_c(s) ds` over the whole schedule,
/// including waits, for each `X` in `ops`. Linear in `X`.
pub fn first_order_integrals(seq: &PulseSequence, sys: &ControlSystem, ops: &[CMatrix]) -> Result<Vec<CMatrix>> {
    let prop = propagate(seq, sys)?;
    let n = sys.dim();
    for x in ops {
        if x.nrows() != n || x.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.nrows(),
            });
        }
    }
    let mut acc = vec![CMatrix::zeros(n, n); ops.len()];
    for (k, step) in seq.steps().iter().enumerate() {
        let before = &prop.prefixes[k];
        let after = &prop.prefixes[k + 1];
        if step.duration > 0.0 {
            for (x, total) in ops.iter().zip(acc.iter_mut()) {
                let local = match sys.hamiltonian(step.label) {
                    Some(h) => step_integral(h, x, step.duration),
                    None => x.scale(step.duration),
                };
                *total += before.conjugate(&local);
            }
        }
        if step.wait > 0.0 {
            for (x, total) in ops.iter().zip(acc.iter_mut()) {
                *total += after.conjugate(x).scale(step.wait);
            }
        }
    }
    Ok(acc)
}

/// First-order integrals of every basis generator, with their coordinates.
#[derive(Clone, Debug)]
pub struct FirstOrderMap {
    pub operators: Vec<CMatrix>,
    /// Row `i` holds the `su(N)` coordinates of `operators[i]`.
    pub coeff_matrix: nalgebra::DMatrix<f64>,
}

impl FirstOrderMap {
    /// Row-major stacking of `coeff_matrix`, length `(N²−1)²`.
    pub fn stacked(&self) -> Vec<f64> {
        let (r, c) = self.coeff_matrix.shape();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.coeff_matrix[(i, j)]);
            }
        }
        out
    }

    pub fn norms(&self) -> Vec<f64> {
        self.operators.iter().map(frobenius).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.norms().into_iter().fold(0.0, f64::max)
    }
}

pub fn first_order_map(seq: &PulseSequence, sys: &ControlSystem) -> Result<FirstOrderMap> {
    let gens: Vec<CMatrix> = sys.basis().generators().iter().map(|g| g.matrix().clone()).collect();
    let operators = first_order_integrals(seq, sys, &gens)?;
    let m = gens.len();
    let mut coeff_matrix = nalgebra::DMatrix::zeros(m, m);
    for (i, op) in operators.iter().enumerate() {
        for (j, c) in sys.basis().coefficients(op).into_iter().enumerate() {
            coeff_matrix[(i, j)] = c;
        }
    }
    Ok(FirstOrderMap {
        operators,
        coeff_matrix,
    })
}

/// Static noise `Σ ε_i G_i`.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    coefficients: Vec<f64>,
    operator: HermitianOperator,
}

impl NoiseModel {
    pub fn new(basis: &GeneratorBasis, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: coefficients.len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("noise coefficients must be finite".into()));
        }
        let operator = HermitianOperator::new(basis.reconstruct(&coefficients))?;
        Ok(Self {
            coefficients,
            operator,
        })
    }

    pub fn zero(basis: &GeneratorBasis) -> Self {
        Self {
            coefficients: vec![0.0; basis.len()],
            operator: HermitianOperator::zero(basis.dim()),
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }

    pub fn scaled(&self, basis: &GeneratorBasis, s: f64) -> Result<Self> {
        Self::new(basis, self.coefficients.iter().map(|c| c * s).collect())
    }
}

/// Exact evolution under control plus static noise; waits evolve under the
/// noise alone.
pub fn propagate_noisy(seq: &PulseSequence, sys: &ControlSystem, noise: &NoiseModel) -> Result<UnitaryOperator> {
    if noise.operator().dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: noise.operator().dim(),
        });
    }
    evolve(seq, sys, Some(noise.operator()), |_| {})
}

/// Phase-invariant distance between the noisy and noiseless final gates,
/// i.e. the size of `Ũ(T_c) − I` up to global phase.
pub fn interaction_error(seq: &PulseSequence, sys: &ControlSystem, noise: &NoiseModel) -> Result<f64> {
    let noisy = propagate_noisy(seq, sys, noise)?;
    let clean = propagate(seq, sys)?.final_unitary;
    phase_invariant_distance(&noisy, &clean)
}

/// Minimum Simpson panels per step in the second-order integral.
pub const SECOND_ORDER_MIN_PANELS: usize = 256;

/// `∫₀^{T_c} dt ∫₀^t ds U_c†(t) G_m U_c(t) U_c†(s) G_n U_c(s)` for generator
/// indices `m`, `n` (0-based).
///
/// The inner integral is carried exactly as a running first-order partial;
/// the outer one uses composite Simpson on each control step and is exact
/// over waits and idle steps.
pub fn second_order_residual(seq: &PulseSequence, sys: &ControlSystem, m: usize, n: usize) -> Result<CMatrix> {
    let basis = sys.basis();
    if m >= basis.len() || n >= basis.len() {
        return Err(Error::InvalidArgument(format!(
            "generator index out of range (have {})",
            basis.len()
        )));
    }
    let prop = propagate(seq, sys)?;
    let dim = sys.dim();
    let (gm, gn) = (basis.generator(m), basis.generator(n));
    let mut inner = CMatrix::zeros(dim, dim);
    let mut total = CMatrix::zeros(dim, dim);

    // Constant-frame segment of length tau: ∫₀^τ Mm (I0 + t Mn) dt.
    let flat = |u: &UnitaryOperator, tau: f64, inner: &mut CMatrix, total: &mut CMatrix| {
        let mm = u.conjugate(gm);
        let mn = u.conjugate(gn);
        *total += &mm * &*inner * Complex64::new(tau, 0.0) + &mm * &mn * Complex64::new(0.5 * tau * tau, 0.0);
        *inner += mn.scale(tau);
    };

    for (k, step) in seq.steps().iter().enumerate() {
        let before = &prop.prefixes[k];
        if step.duration > 0.0 {
            match sys.hamiltonian(step.label) {
                None => flat(before, step.duration, &mut inner, &mut total),
                Some(h) => {
                    let t = step.duration;
                    let spread = h.eigenvalues().iter().fold(0.0f64, |a, l| a.max(l.abs())) * 2.0;
                    let mut panels = SECOND_ORDER_MIN_PANELS.max((t * spread * 8.0).ceil() as usize);
                    panels += panels % 2;
                    let dt = t / panels as f64;
                    let mut sum = CMatrix::zeros(dim, dim);
                    for p in 0..=panels {
                        let s = p as f64 * dt;
                        let u = h.exp_neg_i(s).compose(before);
                        let partial = &inner + before.conjugate(&step_integral(h, gn, s));
                        let value = u.conjugate(gm) * partial;
                        let w = if p == 0 || p == panels {
                            1.0
                        } else if p % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        sum += value.scale(w);
                    }
                    total += sum.scale(dt / 3.0);
                    inner += before.conjugate(&step_integral(h, gn, t));
                }
            }
        }
        if step.wait > 0.0 {
            flat(&prop.prefixes[k + 1], step.wait, &mut inner, &mut total);
        }
    }
    Ok(total)
}

/// `dU/dT_k` of the final control unitary for each step, as
/// `U · U_k† (−iH_k) U_k` with `U_k` the prefix through step `k`.
pub fn duration_jacobian(seq: &PulseSequence, sys: &ControlSystem) -> Result<Vec<CMatrix>> {
    let prop = propagate(seq, sys)?;
    let minus_i = Complex64::new(0.0, -1.0);
    Ok(seq
        .steps()
        .iter()
        .enumerate()
        .map(|(k, step)| match sys.hamiltonian(step.label) {
            Some(h) => {
                let gen = prop.prefixes[k + 1].conjugate(h.matrix()) * minus_i;
                prop.final_unitary.matrix() * gen
            }
            None => CMatrix::from_element(sys.dim(), sys.dim(), ZERO),
        })
        .collect())
}
