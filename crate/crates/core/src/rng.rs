//! All randomness flows from one user seed through named sub-streams.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Restart = 1,
    Fold = 2,
    CvPlan = 3,
}

pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 48) | (index & 0xFFFF_FFFF_FFFF));
    rng
}

/// Seed for a derived task (e.g. one cross-validation fold).
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    substream(seed, stream, index).next_u64()
}

/// `n x d` matrix of standard normals, drawn row by row.
pub fn standard_normal_rows(rng: &mut impl Rng, n: usize, d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, d);
    for i in 0..n {
        for k in 0..d {
            m[(i, k)] = rng.sample(StandardNormal);
        }
    }
    m
}
