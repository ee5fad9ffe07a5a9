//! Uniform and class re-balanced mini-batch samplers.
//!
//! The uniform sampler draws every instance with probability `1/N`. The
//! re-balanced sampler first picks class `k` with probability
//! `P_k = w_k / sum_j w_j`, `w_k = (N_max / N_k)^(1/gamma)`, then an instance
//! of that class uniformly. Both draw with replacement; an epoch is
//! `ceil(N / B)` batches so the two streams stay paired step for step.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, LabeledBatch};
use crate::rng::{self, RunRng, Stream};
use crate::{Error, Result};

/// Exponent of the re-balanced sampler. `Infinite` is exact class-balanced sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    Finite(f64),
    Infinite,
}

impl Gamma {
    pub fn validate(self) -> Result<()> {
        match self {
            Gamma::Finite(g) if !(g > 0.0 && g.is_finite()) => Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {g}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Finite(g) => write!(f, "{g}"),
            Gamma::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(Gamma::Infinite);
        }
        let g: f64 = s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("gamma `{s}` is neither a number nor `inf`")))?;
        if g.is_infinite() && g > 0.0 {
            return Ok(Gamma::Infinite);
        }
        let gamma = Gamma::Finite(g);
        gamma.validate()?;
        Ok(gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RebalancedSamplerConfig {
    pub gamma: Gamma,
}

impl Default for RebalancedSamplerConfig {
    fn default() -> Self {
        Self {
            gamma: Gamma::Infinite,
        }
    }
}

impl RebalancedSamplerConfig {
    /// Un-normalized class weights `w_k`.
    pub fn weights(&self, counts: &[usize]) -> Result<Vec<f64>> {
        self.gamma.validate()?;
        if counts.is_empty() {
            return Err(Error::InvalidDataset("no classes".into()));
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidDataset(format!("class {k} is empty")));
        }
        let n_max = *counts.iter().max().unwrap() as f64;
        Ok(match self.gamma {
            Gamma::Infinite => vec![1.0; counts.len()],
            Gamma::Finite(g) => counts.iter().map(|&c| (n_max / c as f64).powf(1.0 / g)).collect(),
        })
    }
}

/// Per-class draw probabilities of the re-balanced sampler.
pub fn sampler_distribution(config: &RebalancedSamplerConfig, counts: &[usize]) -> Result<Vec<f64>> {
    let w = config.weights(counts)?;
    let total: f64 = w.iter().sum();
    Ok(w.iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub batch_size: usize,
    pub seed: u64,
    /// Drop the short final batch instead of emitting it.
    pub drop_last: bool,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self {
            batch_size: 128,
            seed: 0,
            drop_last: false,
        }
    }
}

impl BatchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        Ok(())
    }

    /// Batch sizes making up one epoch over `n` samples: `ceil(n / B)`
    /// batches, the last one short unless `drop_last` (which never drops
    /// the only batch).
    pub fn epoch_batch_sizes(&self, n: usize) -> Vec<usize> {
        let b = self.batch_size;
        let full = n / b;
        let rem = n % b;
        let mut sizes = vec![b; full];
        if rem > 0 && (!self.drop_last || full == 0) {
            sizes.push(rem);
        }
        sizes
    }
}

/// Draws indices with probability `1/N` each.
#[derive(Debug, Clone)]
pub struct UniformSampler {
    n: usize,
    rng: RunRng,
}

impl UniformSampler {
    pub fn new(n: usize, rng: RunRng) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDataset("cannot sample from an empty dataset".into()));
        }
        Ok(Self { n, rng })
    }

    pub fn draw(&mut self, size: usize) -> Vec<usize> {
        (0..size).map(|_| self.rng.random_range(0..self.n)).collect()
    }
}

#[derive(Debug, Clone)]
enum ClassChoice {
    Uniform(usize),
    Weighted(WeightedIndex<f64>),
}

/// Draws a class with probability `P_k`, then a member of that class uniformly.
#[derive(Debug, Clone)]
pub struct RebalancedSampler {
    members: Vec<Vec<usize>>,
    probabilities: Vec<f64>,
    choice: ClassChoice,
    rng: RunRng,
}

impl RebalancedSampler {
    pub fn new(dataset: &Dataset, config: &RebalancedSamplerConfig, rng: RunRng) -> Result<Self> {
        let probabilities = sampler_distribution(config, dataset.class_counts())?;
        let choice = match config.gamma {
            Gamma::Infinite => ClassChoice::Uniform(probabilities.len()),
            Gamma::Finite(_) => ClassChoice::Weighted(
                WeightedIndex::new(&probabilities)
                    .map_err(|e| Error::InvalidConfig(format!("sampler weights: {e}")))?,
            ),
        };
        Ok(Self {
            members: dataset.class_indices(),
            probabilities,
            choice,
            rng,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn draw_class(&mut self) -> usize {
        match &self.choice {
            ClassChoice::Uniform(k) => self.rng.random_range(0..*k),
            ClassChoice::Weighted(w) => w.sample(&mut self.rng),
        }
    }

    pub fn draw(&mut self, size: usize) -> Vec<usize> {
        (0..size)
            .map(|_| {
                let k = self.draw_class();
                let m = &self.members[k];
                m[self.rng.random_range(0..m.len())]
            })
            .collect()
    }
}

/// One epoch of uniformly sampled batches.
pub fn uniform_batch(dataset: &Dataset, spec: &BatchSpec) -> Result<Vec<LabeledBatch>> {
    spec.validate()?;
    let mut sampler = UniformSampler::new(dataset.len(), rng::stream(spec.seed, Stream::UniformSampler))?;
    spec.epoch_batch_sizes(dataset.len())
        .into_iter()
        .map(|size| dataset.batch(&sampler.draw(size)))
        .collect()
}

/// One epoch of re-balanced batches.
pub fn rebalanced_batch(
    dataset: &Dataset,
    config: &RebalancedSamplerConfig,
    spec: &BatchSpec,
) -> Result<Vec<LabeledBatch>> {
    spec.validate()?;
    let mut sampler = RebalancedSampler::new(dataset, config, rng::stream(spec.seed, Stream::RebalancedSampler))?;
    spec.epoch_batch_sizes(dataset.len())
        .into_iter()
        .map(|size| dataset.batch(&sampler.draw(size)))
        .collect()
}
