//! Four-state atom: one `l = 0` level `|0⟩` and three `l = 1` levels
//! `|1⟩, |2⟩, |3⟩` (m = −1, 0, +1), driven by electric and magnetic fields.

use num_complex::Complex64;
use rand::RngExt;

use crate::algebra::{fix_det_su, CMatrix, HermitianOperator, UnitaryOperator, ONE, ZERO};
use crate::error::{Error, Result};
use crate::propagation::ControlSystem;
use crate::random::seeded;

/// Redraws allowed before `default_system` gives up.
pub const MAX_DRAWS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomParameters {
    pub e_minus: f64,
    pub e_zero: f64,
    pub e_plus: f64,
    pub b_perp: f64,
    pub b_z: f64,
}

impl AtomParameters {
    pub fn new(e_minus: f64, e_zero: f64, e_plus: f64, b_perp: f64, b_z: f64) -> Result<Self> {
        let p = Self {
            e_minus,
            e_zero,
            e_plus,
            b_perp,
            b_z,
        };
        if p.as_array().iter().all(|x| x.is_finite()) {
            Ok(p)
        } else {
            Err(Error::InvalidArgument(format!("atom parameters must be finite: {p:?}")))
        }
    }

    pub fn from_array(v: [f64; 5]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.e_minus, self.e_zero, self.e_plus, self.b_perp, self.b_z]
    }
}

fn symmetric_pair(m: &mut CMatrix, r: usize, c: usize) {
    m[(r, c)] = ONE;
    m[(c, r)] = ONE;
}

/// `σ_−, σ_0, σ_+, Λ_⊥, Λ_z` in the basis `|0⟩, |1⟩, |2⟩, |3⟩`.
pub fn coupling_operators() -> [CMatrix; 5] {
    let zero = || CMatrix::from_element(4, 4, ZERO);
    let mut sigma_minus = zero();
    symmetric_pair(&mut sigma_minus, 0, 1);
    let mut sigma_zero = zero();
    symmetric_pair(&mut sigma_zero, 0, 2);
    let mut sigma_plus = zero();
    symmetric_pair(&mut sigma_plus, 0, 3);
    let mut lambda_perp = zero();
    symmetric_pair(&mut lambda_perp, 1, 2);
    symmetric_pair(&mut lambda_perp, 2, 3);
    let mut lambda_z = zero();
    lambda_z[(3, 3)] = ONE;
    lambda_z[(1, 1)] = -ONE;
    [sigma_minus, sigma_zero, sigma_plus, lambda_perp, lambda_z]
}

/// `e_−σ_− + e_0σ_0 + e_+σ_+ + b_⊥Λ_⊥ + b_zΛ_z`.
pub fn build_atom_hamiltonian(p: &AtomParameters) -> HermitianOperator {
    let ops = coupling_operators();
    let mut h = CMatrix::from_element(4, 4, ZERO);
    for (op, w) in ops.iter().zip(p.as_array()) {
        h += op * Complex64::new(w, 0.0);
    }
    HermitianOperator::new(h).expect("real combination of Hermitian couplings")
}

/// Control system with given parameter sets for `A` and `B`.
pub fn atom_system(a: &AtomParameters, b: &AtomParameters) -> Result<ControlSystem> {
    ControlSystem::new(build_atom_hamiltonian(a), build_atom_hamiltonian(b))
}

/// Two parameter sets drawn uniformly from `[−1, 1]⁵`, redrawn until the pair
/// is bracket generating. Returns the parameters alongside the system.
pub fn default_system(seed: u64) -> Result<(ControlSystem, AtomParameters, AtomParameters)> {
    let mut rng = seeded(seed);
    let mut draw = || {
        let mut v = [0.0; 5];
        v.iter_mut().for_each(|x| *x = rng.random_range(-1.0..=1.0));
        AtomParameters::from_array(v).expect("finite draw")
    };
    let mut last_rank = 0;
    for _ in 0..MAX_DRAWS {
        let (pa, pb) = (draw(), draw());
        let sys = atom_system(&pa, &pb)?;
        if sys.is_bracket_generating() {
            return Ok((sys, pa, pb));
        }
        last_rank = sys.closure_rank();
    }
    Err(Error::DegenerateInput(format!(
        "no bracket-generating atom pair in {MAX_DRAWS} draws (last rank {last_rank})"
    )))
}

/// The CNOT permutation matrix, determinant −1.
pub fn cnot_raw() -> UnitaryOperator {
    let mut m = CMatrix::from_element(4, 4, ZERO);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    UnitaryOperator::new(m).expect("permutation matrix")
}

/// CNOT moved into `SU(4)`.
pub fn cnot_target() -> UnitaryOperator {
    fix_det_su(&cnot_raw())
}
