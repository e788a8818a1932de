//! Timings for the alternating product `e^{−iT_K H_K} ⋯ e^{−iT_2 A} e^{−iT_1 B}`
//! that reach a target gate up to global phase.
//!
//! The residual is the `su(N)` part of the principal logarithm of
//! `e^{−iφ} W†U(T)`, where `φ = arg tr(W†U)` strips the global phase. Timings
//! are parameterized as `T_k = θ_k²` and updated by damped Gauss-Newton
//! (Levenberg-Marquardt) from random starting points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::RngExt;

use crate::algebra::{
    fix_det_su, phase_invariant_distance, principal_log_hermitian, principal_root, trace, UnitaryOperator,
};
use crate::error::{Error, Result};
use crate::propagation::{propagate, ControlSystem, PulseSequence};
use crate::random::{seeded, SeededRng};

#[derive(Clone, Debug)]
pub struct SynthesisProblem<'a> {
    pub system: &'a ControlSystem,
    pub target: UnitaryOperator,
    /// Number of alternating steps `K`; at least `N²`.
    pub steps: usize,
    pub max_restarts: usize,
    /// Phase-invariant distance accepted as success.
    pub tol: f64,
    pub max_iterations: usize,
}

impl<'a> SynthesisProblem<'a> {
    pub fn new(system: &'a ControlSystem, target: &UnitaryOperator) -> Self {
        let n = system.dim();
        Self {
            system,
            target: fix_det_su(target),
            steps: n * n,
            max_restarts: 64,
            tol: 1e-8,
            max_iterations: 300,
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.max_restarts = restarts;
        self
    }

    fn validate(&self) -> Result<()> {
        let sys = self.system;
        let n = sys.dim();
        if !sys.is_bracket_generating() {
            return Err(Error::Uncontrollable {
                rank: sys.closure_rank(),
                required: n * n - 1,
            });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.steps < n * n {
            return Err(Error::InvalidArgument(format!(
                "need at least N² = {} steps, got {}",
                n * n,
                self.steps
            )));
        }
        if self.target.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.target.dim(),
            });
        }
        if self.max_restarts == 0 {
            return Err(Error::InvalidArgument("max_restarts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub timings: Vec<f64>,
    pub achieved: UnitaryOperator,
    pub distance: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

impl SynthesisResult {
    pub fn sequence(&self, dim: usize) -> PulseSequence {
        PulseSequence::alternating(dim, &self.timings).expect("synthesized timings are nonnegative")
    }
}

/// Final unitary and the prefixes through each step for alternating timings.
fn alternating_products(sys: &ControlSystem, timings: &[f64]) -> (UnitaryOperator, Vec<UnitaryOperator>) {
    let seq = PulseSequence::alternating(sys.dim(), timings).expect("nonnegative timings");
    let p = propagate(&seq, sys).expect("dimensions agree");
    (p.final_unitary, p.prefixes)
}

fn residual(target: &UnitaryOperator, u: &UnitaryOperator, sys: &ControlSystem) -> Result<DVector<f64>> {
    let e = target.adjoint().compose(u);
    let tr = trace(e.matrix());
    let phase = if tr.norm() > 0.0 {
        Complex64::from_polar(1.0, -tr.arg())
    } else {
        Complex64::new(1.0, 0.0)
    };
    let e = UnitaryOperator::from_matrix_unchecked(e.matrix() * phase);
    let x = principal_log_hermitian(&e)?;
    Ok(DVector::from_vec(sys.basis().coefficients(&x)))
}

/// Jacobian of the residual with respect to `θ`, exact at the solution:
/// `∂U/∂T_k = U · U_k†(−iH_k)U_k`, so the log residual moves by
/// `−U_k† H_k U_k dT_k` to first order.
fn jacobian(sys: &ControlSystem, theta: &[f64], prefixes: &[UnitaryOperator]) -> DMatrix<f64> {
    let m = sys.basis().len();
    let mut j = DMatrix::zeros(m, theta.len());
    for (k, &th) in theta.iter().enumerate() {
        let h = if k % 2 == 0 { sys.b() } else { sys.a() };
        let rotated = prefixes[k + 1].conjugate(h.matrix());
        for (r, c) in sys.basis().coefficients(&rotated).into_iter().enumerate() {
            j[(r, k)] = -2.0 * th * c;
        }
    }
    j
}

struct Attempt {
    theta: Vec<f64>,
    distance: f64,
    iterations: usize,
}

fn solve_from(prob: &SynthesisProblem<'_>, mut theta: Vec<f64>) -> Result<Attempt> {
    let sys = prob.system;
    let timings = |th: &[f64]| th.iter().map(|x| x * x).collect::<Vec<_>>();
    let (mut u, mut prefixes) = alternating_products(sys, &timings(&theta));
    let mut r = residual(&prob.target, &u, sys)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut polish = 0;

    while iterations < prob.max_iterations {
        let distance = phase_invariant_distance(&u, &prob.target)?;
        if distance <= prob.tol {
            // A few extra steps push well below tol when convergence is quadratic.
            polish += 1;
            if polish > 3 || distance <= 1e-3 * prob.tol {
                break;
            }
        }
        iterations += 1;
        let j = jacobian(sys, &theta, &prefixes);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let grad = &jt * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for d in 0..lhs.nrows() {
                lhs[(d, d)] += lambda * (1.0 + jtj[(d, d)]);
            }
            let Some(step) = lhs.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (tu, tp) = alternating_products(sys, &timings(&trial));
            let tr = residual(&prob.target, &tu, sys)?;
            let tc = tr.norm_squared();
            if tc < cost {
                theta = trial;
                u = tu;
                prefixes = tp;
                r = tr;
                cost = tc;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Ok(Attempt {
        distance: phase_invariant_distance(&u, &prob.target)?,
        theta,
        iterations,
    })
}

fn random_start(prob: &SynthesisProblem<'_>, rng: &mut SeededRng) -> Vec<f64> {
    let scale = prob.system.control_scale().max(1e-12);
    let upper = 2.0 * std::f64::consts::PI / scale;
    (0..prob.steps).map(|_| rng.random_range(0.0..upper).sqrt()).collect()
}

/// Multistart search; deterministic for a given `(problem, seed)`.
///
/// Returns the best attempt, with `converged == false` if no restart reached
/// `tol`.
pub fn synthesize_timings(prob: &SynthesisProblem<'_>, seed: u64) -> Result<SynthesisResult> {
    prob.validate()?;
    let n = prob.system.dim();

    let id = UnitaryOperator::identity(n);
    if phase_invariant_distance(&id, &prob.target)? <= prob.tol {
        return Ok(SynthesisResult {
            timings: vec![0.0; prob.steps],
            achieved: id,
            distance: phase_invariant_distance(&UnitaryOperator::identity(n), &prob.target)?,
            iterations: 0,
            restarts_used: 0,
            converged: true,
        });
    }

    let mut rng = seeded(seed);
    let mut best: Option<Attempt> = None;
    let mut total_iterations = 0;
    let mut restarts_used = 0;
    for _ in 0..prob.max_restarts {
        restarts_used += 1;
        let attempt = solve_from(prob, random_start(prob, &mut rng))?;
        total_iterations += attempt.iterations;
        let done = attempt.distance <= prob.tol;
        if best.as_ref().is_none_or(|b| attempt.distance < b.distance) {
            best = Some(attempt);
        }
        if done {
            break;
        }
    }
    let best = best.expect("at least one restart");
    let timings: Vec<f64> = best.theta.iter().map(|x| x * x).collect();
    let (achieved, _) = alternating_products(prob.system, &timings);
    let distance = phase_invariant_distance(&achieved, &prob.target)?;
    Ok(SynthesisResult {
        timings,
        achieved,
        converged: distance <= prob.tol,
        distance,
        iterations: total_iterations,
        restarts_used,
    })
}

#[derive(Clone, Debug)]
pub struct RepeatedSynthesis {
    /// `reps` copies of the root sequence, no waits.
    pub sequence: PulseSequence,
    pub root: UnitaryOperator,
    pub root_result: SynthesisResult,
    /// Phase-invariant distance of the full sequence to the target.
    pub distance: f64,
    pub reps: usize,
}

impl RepeatedSynthesis {
    pub fn converged(&self, tol: f64) -> bool {
        self.root_result.converged && self.distance <= self.reps as f64 * tol
    }
}

/// Synthesizes the principal `reps`-th root of `target` with `steps`
/// alternating steps and repeats it `reps` times.
pub fn synthesize_repeated(
    sys: &ControlSystem,
    target: &UnitaryOperator,
    reps: usize,
    steps: usize,
    tol: f64,
    max_restarts: usize,
    seed: u64,
) -> Result<RepeatedSynthesis> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    let target = fix_det_su(target);
    let root = principal_root(&target, reps)?;
    let prob = SynthesisProblem::new(sys, &root)
        .with_steps(steps)
        .with_tol(tol)
        .with_restarts(max_restarts);
    let root_result = synthesize_timings(&prob, seed)?;
    let sequence = root_result.sequence(sys.dim()).repeated(reps);
    let achieved = propagate(&sequence, sys)?.final_unitary;
    let distance = phase_invariant_distance(&achieved, &target)?;
    Ok(RepeatedSynthesis {
        sequence,
        root,
        root_result,
        distance,
        reps,
    })
}
