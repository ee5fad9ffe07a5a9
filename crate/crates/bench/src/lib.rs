//! Fixtures shared by the benchmarks.

use ltmix::datasets::{make_gaussian_longtail, Dataset, LongTailSpec};
use ltmix::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(vec![rows, cols], data).expect("positive dims")
}

/// Ten-class Gaussian long tail, 500 samples in the head class, ratio 100.
pub fn longtail_gaussian() -> Dataset {
    make_gaussian_longtail(&LongTailSpec::exponential(10, 500, 100.0), 16, 3.0, 0)
        .expect("valid spec")
}
