//! Seeded random streams. Every random quantity in the crate is drawn from a
//! ChaCha stream keyed by an explicit seed so runs are reproducible.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub(crate) type Stream = ChaCha8Rng;

pub(crate) fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent seed from a base seed and a salt (splitmix64).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn normal(rng: &mut Stream) -> f64 {
    rng.sample(StandardNormal)
}

pub(crate) fn gaussian_matrix(rng: &mut Stream, rows: usize, cols: usize) -> DMatrix<f64> {
    // Filled column by column so the draw order is part of the contract.
    DMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| normal(rng)))
}

pub(crate) fn gaussian_vector(rng: &mut Stream, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| normal(rng)))
}
