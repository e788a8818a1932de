//! Pulse-timing synthesis and first-order noise protection for two-valued
//! quantum control.
//!
//! A gate is built from alternating evolutions under two fixed Hamiltonians
//! `A` and `B`. Waits with zero control are then inserted so that the
//! first-order effect of any static noise cancels. [`nogo`] shows why the
//! waits are needed.

pub mod algebra;
pub mod atom;
pub mod error;
pub mod nogo;
pub mod nonneg;
pub mod propagation;
pub mod protection;
pub mod random;
pub mod sweep;
pub mod synthesis;

pub use algebra::{
    fix_det_su, lie_closure_rank, phase_invariant_distance, principal_log_hermitian, principal_root, project_su,
    CMatrix, GeneratorBasis, HermitianOperator, SuProjection, UnitaryOperator,
};
pub use atom::{build_atom_hamiltonian, cnot_raw, cnot_target, default_system, AtomParameters};
pub use error::{Error, Result};
pub use nogo::{uncorrectable_dimension, uncorrectable_subspace, verify_closed_form, NoGoReport};
pub use propagation::{
    first_order_map, interaction_error, propagate, propagate_noisy, second_order_residual, ControlSystem,
    FirstOrderMap, NoiseModel, PulseSequence, PulseStep, StepLabel,
};
pub use protection::{
    assemble_protection_system, protect_sequence, solve_waits, Fallback, ProtectionOptions, ProtectionReport,
    ProtectionSystem, Rung, WaitSolution,
};
pub use sweep::{fit_loglog_slope, run_sweep, sweep_slopes, SweepConfig, SweepRow, SweepSlopes};
pub use synthesis::{synthesize_repeated, synthesize_timings, RepeatedSynthesis, SynthesisProblem, SynthesisResult};
