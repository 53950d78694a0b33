//! Seeded inputs shared by the benchmarks.

use datgan_core::markets::{build_conditioning, DEFAULT_WINDOWS};
use datgan_core::transport::PointCloud;
use datgan_core::{ConditioningState, DecisionParams, Net, ReturnPanel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Conditioning state at the end of a random `rows x d` panel.
pub fn conditioning(rows: usize, d: usize, params: &DecisionParams, rng: &mut ChaCha8Rng) -> ConditioningState {
    let panel = ReturnPanel::new(uniform(rows, d, 0.05, rng), None).unwrap();
    build_conditioning(&panel, rows - 1, &DEFAULT_WINDOWS, params.zeta).unwrap()
}

pub fn cloud(n: usize, d: usize, rng: &mut ChaCha8Rng) -> PointCloud {
    PointCloud::new(uniform(n, d, 1.0, rng)).unwrap()
}

pub fn net(shape: &[usize], rng: &mut ChaCha8Rng) -> Net {
    Net::init_uniform(shape, 0.1, rng).unwrap()
}
