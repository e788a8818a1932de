//! Seeded random instances: Hermitian matrices, Haar unitaries, unit vectors.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{fix_det_su, hermitian_part, CMatrix, HermitianOperator, UnitaryOperator};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| Complex64::new(gaussian(rng), gaussian(rng)))
}

/// GUE-like Hermitian matrix with unit-variance off-diagonal entries.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianOperator {
    let g = ginibre(n, rng);
    HermitianOperator::new(hermitian_part(&g).scale(std::f64::consts::FRAC_1_SQRT_2))
        .expect("hermitian part is Hermitian")
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryOperator {
    let qr = ginibre(n, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    UnitaryOperator::new(q).expect("QR factor is unitary")
}

/// Haar unitary moved into `SU(N)`.
pub fn random_su<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryOperator {
    fix_det_su(&random_unitary(n, rng))
}

/// Uniformly distributed direction on the unit sphere in `R^len`.
pub fn random_unit_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
