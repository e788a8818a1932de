//! Waiting times that cancel the first-order effect of every static noise
//! generator.
//!
//! A wait `τ_n` after step `n` adds `τ_n U_n†G_iU_n` to the first-order
//! integral of `G_i`, with `U_n` the control unitary at the end of that step.
//! Stacking the `su(N)` coordinates of all `N²−1` integrals gives the linear
//! system `g + Fτ = 0` over `τ ≥ 0`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::algebra::{phase_invariant_distance, UnitaryOperator};
use crate::error::{Error, Result};
use crate::nonneg::{solve_nonneg, Method};
use crate::propagation::{first_order_map, propagate, ControlSystem, PulseSequence, PulseStep, StepLabel};
use crate::random::seeded;
use crate::synthesis::{synthesize_timings, SynthesisProblem};
use rand::RngExt;

/// Deviation allowed between a column norm of `F` and `sqrt(N²−1)`.
const COLUMN_NORM_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct ProtectionSystem {
    /// `(N²−1)² × M`; column `n` stacks the coordinates of `U_n†G_iU_n` over `i`.
    pub f: DMatrix<f64>,
    /// Stacked coordinates of the first-order integrals of the input.
    pub g: DVector<f64>,
}

impl ProtectionSystem {
    pub fn slots(&self) -> usize {
        self.f.ncols()
    }

    pub fn equations(&self) -> usize {
        self.f.nrows()
    }

    /// `‖g + Fτ‖₂`.
    pub fn residual(&self, tau: &DVector<f64>) -> f64 {
        (&self.g + &self.f * tau).norm()
    }
}

/// Coordinates of `U†G_iU` over all generators, stacked by `i`.
fn adjoint_column(sys: &ControlSystem, u: &UnitaryOperator) -> Vec<f64> {
    sys.basis()
        .generators()
        .iter()
        .flat_map(|g| sys.basis().coefficients(&u.conjugate(g.matrix())))
        .collect()
}

/// One wait slot after every step. Existing waits are part of `g`.
pub fn assemble_protection_system(seq: &PulseSequence, sys: &ControlSystem) -> Result<ProtectionSystem> {
    let prop = propagate(seq, sys)?;
    let map = first_order_map(seq, sys)?;
    let m = sys.basis().len();
    let cols: Vec<Vec<f64>> = prop.prefixes[1..]
        .par_iter()
        .map(|u| adjoint_column(sys, u))
        .collect();
    let f = DMatrix::from_fn(m * m, cols.len(), |r, c| cols[c][r]);
    let expected = (m as f64).sqrt();
    for (c, col) in f.column_iter().enumerate() {
        let dev = (col.norm() - expected).abs();
        if dev > COLUMN_NORM_TOL * expected {
            return Err(Error::NumericFailure(format!(
                "wait column {c} has norm {} instead of {expected}",
                col.norm()
            )));
        }
    }
    Ok(ProtectionSystem {
        f,
        g: DVector::from_vec(map.stacked()),
    })
}

#[derive(Clone, Debug)]
pub struct WaitSolution {
    pub tau: Vec<f64>,
    pub residual: f64,
    /// `residual / ‖g‖` (0 when `g = 0`).
    pub relative: f64,
    pub method: Method,
}

/// Nonnegative `τ` with `g + Fτ = 0`, minimizing the total wait.
pub fn solve_waits(psys: &ProtectionSystem, tol: f64) -> Result<WaitSolution> {
    let sol = solve_nonneg(&psys.f, &(-&psys.g), tol)?;
    let gnorm = psys.g.norm();
    Ok(WaitSolution {
        residual: sol.residual,
        relative: if gnorm > 0.0 { sol.residual / gnorm } else { 0.0 },
        tau: sol.x.iter().copied().collect(),
        method: sol.method,
    })
}

/// What to try when the input sequence does not admit nonnegative waits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fallback {
    /// Report failure immediately.
    None,
    /// Also try with every step split in two (twice the wait slots).
    Split,
    /// Also append identity excursions of growing length.
    Extend,
}

impl Fallback {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fallback::None => "none",
            Fallback::Split => "split",
            Fallback::Extend => "extend",
        }
    }
}

impl std::str::FromStr for Fallback {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Fallback::None),
            "split" => Ok(Fallback::Split),
            "extend" => Ok(Fallback::Extend),
            other => Err(Error::InvalidArgument(format!(
                "unknown fallback '{other}' (expected none, split or extend)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProtectionOptions {
    /// Relative residual accepted for `g + Fτ = 0`.
    pub tol: f64,
    pub fallback: Fallback,
    /// Excursion lengths tried by `Fallback::Extend`, as multiples of `(N²−1)²`.
    pub extend_factors: Vec<usize>,
    /// Accuracy of the tail that closes an excursion.
    pub synthesis_tol: f64,
    pub seed: u64,
}

impl Default for ProtectionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            fallback: Fallback::Extend,
            extend_factors: vec![4, 8, 16],
            synthesis_tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rung {
    AlreadyProtected,
    Direct,
    Split,
    /// Excursion of the given number of steps, tail included.
    Extend(usize),
}

impl Rung {
    pub fn describe(&self) -> String {
        match self {
            Rung::AlreadyProtected => "already-protected".into(),
            Rung::Direct => "direct".into(),
            Rung::Split => "split".into(),
            Rung::Extend(n) => format!("extend({n})"),
        }
    }
}

/// Attempted rung that did not reach the tolerance.
#[derive(Clone, Debug)]
pub struct FailedAttempt {
    pub rung: Rung,
    pub relative: f64,
}

#[derive(Clone, Debug)]
pub struct ProtectionReport {
    pub sequence: PulseSequence,
    pub rung: Rung,
    pub method: Method,
    /// Wait added after each step of `sequence`.
    pub tau: Vec<f64>,
    pub g_norm: f64,
    pub residual: f64,
    pub relative: f64,
    pub slots: usize,
    /// Largest `‖𝒢_i‖_F` of the output, recomputed from scratch.
    pub max_first_order_norm: f64,
    pub total_wait: f64,
    pub control_duration: f64,
    /// Phase-invariant distance between the noiseless gates of input and output.
    pub gate_change: f64,
    pub failed_attempts: Vec<FailedAttempt>,
}

impl ProtectionReport {
    pub fn wait_ratio(&self) -> f64 {
        if self.control_duration > 0.0 {
            self.total_wait / self.control_duration
        } else {
            0.0
        }
    }
}

/// `max_i ‖𝒢_i‖_F ≤ tol · T · √2`.
fn first_order_bound(seq: &PulseSequence, tol: f64) -> f64 {
    tol * seq.total_duration() * std::f64::consts::SQRT_2
}

/// Random alternating block followed by a synthesized tail that undoes it,
/// labelled to continue the alternation after `prefix_len` steps.
fn identity_excursion(
    sys: &ControlSystem,
    prefix_len: usize,
    block_len: usize,
    synthesis_tol: f64,
    seed: u64,
) -> Result<PulseSequence> {
    let n = sys.dim();
    // The tail is synthesized as a B-first alternating product, so it has to
    // start at an even position.
    let block_len = if (prefix_len + block_len) % 2 == 1 { block_len + 1 } else { block_len };
    let mut rng = seeded(seed);
    let upper = 2.0 * std::f64::consts::PI / sys.control_scale().max(1e-12);
    let block: Vec<PulseStep> = (0..block_len)
        .map(|k| PulseStep::new(StepLabel::alternating(prefix_len + k), rng.random_range(0.0..upper), 0.0))
        .collect();
    let block = PulseSequence::new(n, block)?;
    let u_block = propagate(&block, sys)?.final_unitary;
    let tail_steps = if (n * n) % 2 == 0 { n * n } else { n * n + 1 };
    let prob = SynthesisProblem::new(sys, &u_block.adjoint())
        .with_steps(tail_steps)
        .with_tol(synthesis_tol);
    let tail = synthesize_timings(&prob, seed ^ 0x5eed)?;
    if !tail.converged {
        return Err(Error::NumericFailure(format!(
            "excursion tail reached distance {:e} > {synthesis_tol:e}",
            tail.distance
        )));
    }
    block.concat(&tail.sequence(n))
}

fn attempt(candidate: &PulseSequence, sys: &ControlSystem, tol: f64) -> Result<(ProtectionSystem, WaitSolution)> {
    let psys = assemble_protection_system(candidate, sys)?;
    let sol = solve_waits(&psys, tol)?;
    Ok((psys, sol))
}

/// Fills the waits of `seq` so that all first-order noise integrals vanish,
/// walking the fallback ladder of `opts` if the input alone is infeasible.
pub fn protect_sequence(seq: &PulseSequence, sys: &ControlSystem, opts: &ProtectionOptions) -> Result<ProtectionReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", opts.tol)));
    }
    let reference = propagate(seq, sys)?.final_unitary;
    let g_norm = DVector::from_vec(first_order_map(seq, sys)?.stacked()).norm();

    let finish = |candidate: PulseSequence,
                  rung: Rung,
                  sol: WaitSolution,
                  failed: Vec<FailedAttempt>|
     -> Result<ProtectionReport> {
        let out = candidate.with_added_waits(&sol.tau)?;
        let max_norm = first_order_map(&out, sys)?.max_norm();
        let bound = first_order_bound(&out, opts.tol);
        if max_norm > bound {
            return Err(Error::ProtectionFailure {
                residual: max_norm,
                relative: max_norm / (out.total_duration() * std::f64::consts::SQRT_2).max(f64::MIN_POSITIVE),
            });
        }
        let achieved = propagate(&out, sys)?.final_unitary;
        Ok(ProtectionReport {
            gate_change: phase_invariant_distance(&achieved, &reference)?,
            total_wait: out.waits().iter().sum(),
            control_duration: out.control_duration(),
            slots: candidate.len(),
            tau: sol.tau,
            residual: sol.residual,
            relative: sol.relative,
            method: sol.method,
            max_first_order_norm: max_norm,
            failed_attempts: failed,
            sequence: out,
            rung,
            g_norm,
        })
    };

    let current = first_order_map(seq, sys)?.max_norm();
    if current <= first_order_bound(seq, opts.tol) {
        let sol = WaitSolution {
            tau: vec![0.0; seq.len()],
            residual: g_norm,
            relative: if g_norm > 0.0 { 1.0 } else { 0.0 },
            method: Method::Trivial,
        };
        return finish(seq.clone(), Rung::AlreadyProtected, sol, Vec::new());
    }

    let mut failed = Vec::new();
    let mut last_err;
    match attempt(seq, sys, opts.tol) {
        Ok((_, sol)) => return finish(seq.clone(), Rung::Direct, sol, failed),
        Err(e) => last_err = e,
    }
    note_failure(&mut failed, Rung::Direct, &last_err);

    if matches!(opts.fallback, Fallback::Split | Fallback::Extend) {
        let split = seq.split_steps(2)?;
        match attempt(&split, sys, opts.tol) {
            Ok((_, sol)) => return finish(split, Rung::Split, sol, failed),
            Err(e) => last_err = e,
        }
        note_failure(&mut failed, Rung::Split, &last_err);
    }

    if opts.fallback == Fallback::Extend {
        let m = sys.basis().len();
        for (k, &factor) in opts.extend_factors.iter().enumerate() {
            let seed = opts.seed.wrapping_add(k as u64);
            let excursion = match identity_excursion(sys, seq.len(), factor * m * m, opts.synthesis_tol, seed) {
                Ok(x) => x,
                Err(e) => {
                    last_err = e;
                    continue;
                }
            };
            let extended = seq.concat(&excursion)?;
            let rung = Rung::Extend(excursion.len());
            match attempt(&extended, sys, opts.tol) {
                Ok((_, sol)) => return finish(extended, rung, sol, failed),
                Err(e) => last_err = e,
            }
            note_failure(&mut failed, rung, &last_err);
        }
    }
    Err(last_err)
}

fn note_failure(failed: &mut Vec<FailedAttempt>, rung: Rung, err: &Error) {
    if let Error::ProtectionFailure { relative, .. } = err {
        failed.push(FailedAttempt {
            rung,
            relative: *relative,
        });
    }
}
