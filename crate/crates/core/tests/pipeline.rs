use std::sync::OnceLock;

use safegate_core::*;

struct Cnot {
    sys: ControlSystem,
    rep: RepeatedSynthesis,
}

fn cnot() -> &'static Cnot {
    static CELL: OnceLock<Cnot> = OnceLock::new();
    CELL.get_or_init(|| {
        let (sys, _, _) = default_system(7).unwrap();
        let rep = synthesize_repeated(&sys, &cnot_target(), 15, 16, 1e-10, 64, 7).unwrap();
        Cnot { sys, rep }
    })
}

#[test]
fn cnot_sequence_has_the_expected_shape() {
    let c = cnot();
    assert!(c.rep.converged(1e-10));
    assert_eq!(c.rep.sequence.len(), 240);
    assert!(c.rep.sequence.is_alternating());
    assert!(!c.rep.sequence.has_waits());
    assert!(c.rep.distance < 2e-7);
    let psys = assemble_protection_system(&c.rep.sequence, &c.sys).unwrap();
    assert_eq!((psys.equations(), psys.slots()), (225, 240));
}

#[test]
fn cnot_without_fallback_reports_protection_failure() {
    let c = cnot();
    let opts = ProtectionOptions {
        fallback: Fallback::None,
        ..Default::default()
    };
    match protect_sequence(&c.rep.sequence, &c.sys, &opts) {
        Err(Error::ProtectionFailure { relative, .. }) => assert!(relative > 0.5),
        other => panic!("expected a protection failure, got {other:?}"),
    }
}

#[test]
fn extended_cnot_is_protected_and_keeps_the_gate() {
    let c = cnot();
    let opts = ProtectionOptions {
        seed: 7,
        ..Default::default()
    };
    let report = protect_sequence(&c.rep.sequence, &c.sys, &opts).unwrap();
    assert!(matches!(report.rung, Rung::Extend(_)));
    assert!(report.relative <= 1e-8);
    assert!(report.tau.iter().all(|&t| t >= 0.0));
    assert!(report.gate_change <= 1e-9);
    let u = propagate(&report.sequence, &c.sys).unwrap().final_unitary;
    assert!(phase_invariant_distance(&u, &cnot_target()).unwrap() < 2e-7);
    let bound = 1e-8 * report.sequence.total_duration() * std::f64::consts::SQRT_2;
    assert!(first_order_map(&report.sequence, &c.sys).unwrap().max_norm() <= bound);
    // Protection is first order only.
    assert!(second_order_residual(&report.sequence, &c.sys, 0, 1).unwrap().norm() > 1e-6);
}

#[test]
fn cnot_no_go_is_target_dependent() {
    let c = cnot();
    let report = NoGoReport::analyze(&c.rep.sequence, &c.sys).unwrap();
    assert!(report.closed_form_residual < 1e-8 * report.closed_form_norms.iter().fold(1.0f64, |m, &x| m.max(x)));
    assert!(report.target_dependent);
    assert!((1..4).contains(&report.dimension));
}

#[test]
fn truncated_cnot_fails_without_fallback() {
    let c = cnot();
    let steps = c.rep.sequence.steps();
    let truncated = PulseSequence::new(4, steps[..steps.len() - 1].to_vec()).unwrap();
    let opts = ProtectionOptions {
        fallback: Fallback::None,
        ..Default::default()
    };
    assert!(matches!(
        protect_sequence(&truncated, &c.sys, &opts),
        Err(Error::ProtectionFailure { .. })
    ));
}
