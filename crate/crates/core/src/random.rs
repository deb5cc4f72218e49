//! Seeded random instances: Haar unitaries, Ginibre states, projectors.
//!
//! All generators take an explicit `Rng` so callers control streams. Use
//! [`derive_seed`] to split one experiment seed into independent per-trial
//! seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{DensityOperator, HermitianOperator, Matrix, Projector, C64};

pub type StdRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> StdRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Order-sensitive hash of a seed path, e.g. `(seed, n, trial, s)`.
pub fn derive_seed(parts: &[u64]) -> u64 {
    // SplitMix64 finalizer applied as a running mix.
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// `rows × cols` matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase fix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    let qr = ginibre(dim, dim, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `G G† / Tr` with `G` of shape `dim × rank`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityOperator {
    let g = ginibre(dim, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::from_op_unchecked(HermitianOperator::from_matrix_unchecked(m / C64::new(tr, 0.0)))
}

/// `U diag(p) U†` with Haar `U`; `probs` is normalised first.
pub fn random_density_with_spectrum<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> DensityOperator {
    let total: f64 = probs.iter().sum();
    let normed: Vec<f64> = probs.iter().map(|p| p / total).collect();
    let u = random_unitary(probs.len(), rng);
    let d = HermitianOperator::from_real_diagonal(&normed);
    DensityOperator::from_op_unchecked(HermitianOperator::from_matrix_unchecked(&u * d.matrix() * u.adjoint()))
}

/// Uniformly random rank-`rank` projector.
pub fn random_projector<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Projector {
    let u = random_unitary(dim, rng);
    let basis = u.columns(0, rank.min(dim)).into_owned();
    Projector::from_orthonormal_columns(&basis, dim)
}

/// `G† G` for a square Ginibre `G`.
pub fn random_psd<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    let g = ginibre(dim, dim, rng);
    HermitianOperator::from_matrix_unchecked(g.adjoint() * g)
}

/// GUE-like Hermitian matrix.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    HermitianOperator::from_matrix_unchecked(ginibre(dim, dim, rng))
}

/// Diagonal state with i.i.d. exponential weights; every entry positive.
pub fn random_diagonal_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    let w: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / total).collect();
    DensityOperator::from_op_unchecked(HermitianOperator::from_real_diagonal(&p))
}
