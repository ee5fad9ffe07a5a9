use std::f64::consts::PI;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, LongTailSpec};
use crate::numerics::Tensor;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Offset of the lower (minority) moon relative to the upper one.
pub const MOON_OFFSET: (f64, f64) = (1.0, 0.5);

/// Two interleaved unit half-circles. Class 0 (majority) is the upper arc
/// `(cos t, sin t)`; class 1 (minority) is the lower arc
/// `(1 - cos t, 0.5 - sin t)`, with `t ~ U[0, pi]`.
pub fn make_half_moons(
    n_majority: usize,
    imbalance_ratio: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(imbalance_ratio.is_finite() && imbalance_ratio >= 1.0) {
        return Err(Error::InvalidSpec(format!(
            "imbalance ratio must be >= 1, got {imbalance_ratio}"
        )));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::InvalidSpec(format!("noise sd must be >= 0, got {noise_sd}")));
    }
    if n_majority == 0 {
        return Err(Error::InvalidSpec("majority count must be positive".into()));
    }
    let n_minority = (n_majority as f64 / imbalance_ratio).round() as usize;
    if n_minority == 0 {
        return Err(Error::InvalidSpec(format!(
            "{n_majority} / {imbalance_ratio} rounds to an empty minority class"
        )));
    }

    let mut rng = rng::stream(seed, Stream::Data);
    let noise = Normal::new(0.0, noise_sd).expect("validated sd");
    let n = n_majority + n_minority;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (class, count) in [(0usize, n_majority), (1, n_minority)] {
        for _ in 0..count {
            let t = rng.random_range(0.0..=PI);
            let (x, y) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (MOON_OFFSET.0 - t.cos(), MOON_OFFSET.1 - t.sin())
            };
            let (nx, ny) = if noise_sd > 0.0 {
                (noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            data.push(x + nx);
            data.push(y + ny);
            labels.push(class);
        }
    }
    Dataset::new(Tensor::new(vec![n, 2], data)?, labels, 2)
}

/// Class centers with pairwise spacing `class_sep`.
///
/// With `dim >= K` the centers are the scaled simplex `class_sep / sqrt(2) * e_k`
/// (all pairs exactly `class_sep` apart). Otherwise they sit on a circle in
/// the first two coordinates with adjacent chord `class_sep`; in one
/// dimension they sit on a line.
pub fn gaussian_centers(num_classes: usize, dim: usize, class_sep: f64) -> Vec<Vec<f64>> {
    (0..num_classes)
        .map(|k| {
            let mut c = vec![0.0; dim];
            if dim >= num_classes {
                c[k] = class_sep / 2f64.sqrt();
            } else if dim >= 2 {
                let radius = class_sep / (2.0 * (PI / num_classes as f64).sin());
                let angle = 2.0 * PI * k as f64 / num_classes as f64;
                c[0] = radius * angle.cos();
                c[1] = radius * angle.sin();
            } else {
                c[0] = class_sep * k as f64;
            }
            c
        })
        .collect()
}

fn gaussian_with_counts(counts: &[usize], dim: usize, class_sep: f64, seed: u64) -> Result<Dataset> {
    if dim < 1 {
        return Err(Error::InvalidSpec("feature dimension must be at least 1".into()));
    }
    if !(class_sep.is_finite() && class_sep >= 0.0) {
        return Err(Error::InvalidSpec(format!("class separation must be >= 0, got {class_sep}")));
    }
    let centers = gaussian_centers(counts.len(), dim, class_sep);
    let mut rng = rng::stream(seed, Stream::Data);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let n: usize = counts.iter().sum();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (k, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            data.extend(centers[k].iter().map(|&c| c + unit.sample(&mut rng)));
            labels.push(k);
        }
    }
    Dataset::new(Tensor::new(vec![n, dim], data)?, labels, counts.len())
}

/// Isotropic unit-variance Gaussian classes with exactly `N_k` points each.
pub fn make_gaussian_longtail(
    spec: &LongTailSpec,
    dim: usize,
    class_sep: f64,
    seed: u64,
) -> Result<Dataset> {
    let counts = spec.counts()?;
    gaussian_with_counts(&counts, dim, class_sep, seed)
}

/// Balanced companion of [`make_gaussian_longtail`] (same centers), used as a test set.
pub fn make_gaussian_balanced(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    class_sep: f64,
    seed: u64,
) -> Result<Dataset> {
    if per_class == 0 || num_classes == 0 {
        return Err(Error::InvalidSpec("balanced set needs positive class count and size".into()));
    }
    gaussian_with_counts(&vec![per_class; num_classes], dim, class_sep, seed)
}

/// Keep a uniformly random subset of `N_k` rows of each class `k`, then
/// shuffle the result.
pub fn truncate_to_longtail(dataset: &Dataset, spec: &LongTailSpec, seed: u64) -> Result<Dataset> {
    if spec.num_classes != dataset.num_classes() {
        return Err(Error::InvalidSpec(format!(
            "spec has {} classes, dataset has {}",
            spec.num_classes,
            dataset.num_classes()
        )));
    }
    let counts = spec.counts()?;
    let mut rng = rng::stream(seed, Stream::Shuffle);
    let mut keep = Vec::with_capacity(counts.iter().sum());
    for (class, (members, &want)) in dataset.class_indices().iter().zip(&counts).enumerate() {
        if members.len() < want {
            return Err(Error::Capacity {
                class,
                requested: want,
                available: members.len(),
            });
        }
        keep.extend(index::sample(&mut rng, members.len(), want).into_iter().map(|i| members[i]));
    }
    keep.shuffle(&mut rng);
    dataset.subset(&keep)
}
