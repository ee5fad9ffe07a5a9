//! Desk-scale experiments: the half-moons boundary study and the Gaussian
//! long-tail ablation. Shared by the command-line tool and the acceptance tests.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datasets::{make_gaussian_balanced, make_gaussian_longtail, make_half_moons, Dataset, LongTailSpec};
use crate::eval::{evaluate, export_boundary, BoundaryGrid};
use crate::model::{Activation, Branch};
use crate::numerics::SgdConfig;
use crate::sampling::{BatchSpec, Gamma};
use crate::train::{train_run, Method, TrainConfig};
use crate::Result;

/// Test sets use the run seed offset by this constant so they never share
/// draws with the training set.
pub const TEST_SEED_OFFSET: u64 = 0x5EED_7E57;

fn toy_config(method: Method, epochs: usize, batch_size: usize, seed: u64, width: usize) -> TrainConfig {
    TrainConfig {
        method,
        epochs,
        batch: BatchSpec {
            batch_size,
            seed,
            drop_last: false,
        },
        sgd: SgdConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            decay_epochs: vec![epochs * 3 / 5, epochs * 4 / 5],
            decay_factor: 0.1,
        },
        seed,
        hidden: vec![width, width],
        activation: Activation::Relu,
        ..TrainConfig::default()
    }
}

/// Half-moons with a rare lower moon, trained with a three-layer network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoonsStudy {
    pub n_majority: usize,
    pub imbalance_ratio: f64,
    pub noise_sd: f64,
    /// Points per class in the balanced test set.
    pub test_per_class: usize,
    pub width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub resolution: usize,
    pub margin: f64,
}

impl Default for MoonsStudy {
    fn default() -> Self {
        Self {
            n_majority: 1000,
            imbalance_ratio: 100.0,
            noise_sd: 0.15,
            test_per_class: 500,
            width: 32,
            epochs: 60,
            batch_size: 64,
            resolution: 100,
            margin: 0.5,
        }
    }
}

/// Labels used in file names and summaries.
pub const MOONS_METHODS: [(&str, Method); 3] =
    [("erm", Method::Erm), ("mixup", Method::Mixup), ("bilateral", Method::SbnMix)];

#[derive(Debug, Clone, PartialEq)]
pub struct MoonsOutcome {
    pub method: &'static str,
    pub seed: u64,
    pub majority_recall: f64,
    pub minority_recall: f64,
    pub grid: BoundaryGrid,
}

impl MoonsStudy {
    pub fn data(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        let train = make_half_moons(self.n_majority, self.imbalance_ratio, self.noise_sd, seed)?;
        let test = make_half_moons(
            self.test_per_class,
            1.0,
            self.noise_sd,
            seed.wrapping_add(TEST_SEED_OFFSET),
        )?;
        Ok((train, test))
    }

    /// Training configuration of one method. The bilateral variant is the
    /// single-head mix of a uniform and a class-balanced batch without
    /// temperature scaling.
    pub fn config(&self, method: Method, seed: u64) -> TrainConfig {
        let mut c = toy_config(method, self.epochs, self.batch_size, seed, self.width);
        if method == Method::SbnMix {
            c.bilateral_mixup = Some(true);
            c.temperature_scaling = Some(false);
            c.gamma = Gamma::Infinite;
        }
        c
    }

    /// Train all three methods on one seed's data.
    pub fn run_seed(&self, seed: u64) -> Result<(Dataset, Vec<MoonsOutcome>)> {
        let (train, test) = self.data(seed)?;
        let groups = crate::datasets::assign_groups(train.class_counts());
        let mut outcomes = Vec::new();
        for (name, method) in MOONS_METHODS {
            let out = train_run(&self.config(method, seed), &train, &test)?;
            let acc = evaluate(&out.model, &test, &groups, Branch::Fused)?;
            let grid = export_boundary(&out.model, &train, self.resolution, self.margin)?;
            outcomes.push(MoonsOutcome {
                method: name,
                seed,
                majority_recall: acc.per_class[0].unwrap_or(0.0),
                minority_recall: acc.per_class[1].unwrap_or(0.0),
                grid,
            });
        }
        Ok((train, outcomes))
    }
}

/// `method,seed,majority_recall,minority_recall` rows.
pub fn write_moons_summary<W: Write>(outcomes: &[MoonsOutcome], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "method,seed,majority_recall,minority_recall")?;
    for o in outcomes {
        writeln!(w, "{},{},{},{}", o.method, o.seed, o.majority_recall, o.minority_recall)?;
    }
    Ok(())
}

/// Seed-averaged minority recall of `method` over `outcomes`.
pub fn mean_minority_recall(outcomes: &[MoonsOutcome], method: &str) -> f64 {
    let vals: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.method == method)
        .map(|o| o.minority_recall)
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Ten Gaussian classes with an exponential long tail, for ablations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianStudy {
    pub num_classes: usize,
    pub n_max: usize,
    pub imbalance_ratio: f64,
    pub dim: usize,
    pub class_sep: f64,
    pub test_per_class: usize,
    pub width: usize,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for GaussianStudy {
    fn default() -> Self {
        Self {
            num_classes: 10,
            n_max: 500,
            imbalance_ratio: 100.0,
            dim: 16,
            class_sep: 3.0,
            test_per_class: 200,
            width: 64,
            epochs: 30,
            batch_size: 64,
        }
    }
}

/// The four cells of the two-toggle ablation.
pub const ABLATION_CELLS: [(&str, bool, bool); 4] = [
    ("none", false, false),
    ("mixup-only", true, false),
    ("temperature-only", false, true),
    ("both", true, true),
];

impl GaussianStudy {
    pub fn data(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        let spec = LongTailSpec::exponential(self.num_classes, self.n_max, self.imbalance_ratio);
        let train = make_gaussian_longtail(&spec, self.dim, self.class_sep, seed)?;
        let test = make_gaussian_balanced(
            self.num_classes,
            self.test_per_class,
            self.dim,
            self.class_sep,
            seed.wrapping_add(TEST_SEED_OFFSET),
        )?;
        Ok((train, test))
    }

    pub fn config(&self, bilateral_mixup: bool, temperature_scaling: bool, seed: u64) -> TrainConfig {
        let method = if bilateral_mixup && temperature_scaling {
            Method::DbnMix
        } else {
            Method::Dbn
        };
        let mut c = toy_config(method, self.epochs, self.batch_size, seed, self.width);
        c.bilateral_mixup = Some(bilateral_mixup);
        c.temperature_scaling = Some(temperature_scaling);
        c
    }

    /// Balanced test accuracy of each ablation cell on one seed, in
    /// [`ABLATION_CELLS`] order.
    pub fn run_seed(&self, seed: u64) -> Result<[f64; 4]> {
        let (train, test) = self.data(seed)?;
        let mut out = [0.0; 4];
        for (slot, (_, mix, temp)) in out.iter_mut().zip(ABLATION_CELLS) {
            *slot = train_run(&self.config(mix, temp, seed), &train, &test)?
                .record
                .balanced_accuracy();
        }
        Ok(out)
    }
}
