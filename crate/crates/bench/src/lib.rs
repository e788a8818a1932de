//! Shared fixtures for the benchmarks.

use safegate_core::random::{random_hermitian, random_su, seeded};
use safegate_core::{cnot_target, default_system, synthesize_repeated, ControlSystem, PulseSequence, UnitaryOperator};

/// Random bracket-generating pair and a random `SU(N)` target.
pub fn random_problem(n: usize, seed: u64) -> (ControlSystem, UnitaryOperator) {
    let mut rng = seeded(seed);
    let sys = ControlSystem::new(random_hermitian(n, &mut rng), random_hermitian(n, &mut rng)).expect("valid pair");
    (sys, random_su(n, &mut rng))
}

/// Atom system and the unprotected 240-step CNOT.
pub fn cnot_sequence() -> (ControlSystem, PulseSequence) {
    let (sys, _, _) = default_system(7).expect("atom system");
    let rep = synthesize_repeated(&sys, &cnot_target(), 15, 16, 1e-10, 64, 7).expect("synthesis");
    (sys, rep.sequence)
}
