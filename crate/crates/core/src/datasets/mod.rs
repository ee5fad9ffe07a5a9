//! Long-tailed datasets: class-size profiles, synthetic generators,
//! truncation of balanced data, and CSV / packed-binary storage.

mod io;
mod synth;

pub use io::{load_dataset, read_csv, read_packed, save_dataset, write_csv, write_packed, DataFormat};
pub use synth::{
    gaussian_centers, make_gaussian_balanced, make_gaussian_longtail, make_half_moons,
    truncate_to_longtail, MOON_OFFSET,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::Tensor;
use crate::{Error, Result};

/// Class-size group by training count: Many (> 100), Medium (20..=100), Few (< 20).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Many,
    Medium,
    Few,
}

impl Group {
    pub fn of_count(count: usize) -> Self {
        if count > 100 {
            Group::Many
        } else if count >= 20 {
            Group::Medium
        } else {
            Group::Few
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Many => "many",
            Group::Medium => "medium",
            Group::Few => "few",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn assign_groups(counts: &[usize]) -> Vec<Group> {
    counts.iter().map(|&c| Group::of_count(c)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `N_k = round(n_max * ratio^(-k / (K - 1)))`.
    Exponential { ratio: f64 },
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongTailSpec {
    pub num_classes: usize,
    pub n_max: usize,
    pub profile: Profile,
}

impl LongTailSpec {
    pub fn exponential(num_classes: usize, n_max: usize, ratio: f64) -> Self {
        Self {
            num_classes,
            n_max,
            profile: Profile::Exponential { ratio },
        }
    }

    pub fn explicit(counts: Vec<usize>) -> Self {
        Self {
            num_classes: counts.len(),
            n_max: counts.iter().copied().max().unwrap_or(0),
            profile: Profile::Explicit(counts),
        }
    }

    /// Per-class sample counts. Fails if any class would end up empty.
    pub fn counts(&self) -> Result<Vec<usize>> {
        if self.num_classes == 0 {
            return Err(Error::InvalidSpec("need at least one class".into()));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidSpec("n_max must be positive".into()));
        }
        let counts = match &self.profile {
            Profile::Exponential { ratio } => {
                if !(ratio.is_finite() && *ratio >= 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "imbalance ratio must be a finite value >= 1, got {ratio}"
                    )));
                }
                let k_last = (self.num_classes - 1).max(1) as f64;
                (0..self.num_classes)
                    .map(|k| (self.n_max as f64 * ratio.powf(-(k as f64) / k_last)).round() as usize)
                    .collect::<Vec<_>>()
            }
            Profile::Explicit(counts) => {
                if counts.len() != self.num_classes {
                    return Err(Error::InvalidSpec(format!(
                        "{} explicit counts for {} classes",
                        counts.len(),
                        self.num_classes
                    )));
                }
                counts.clone()
            }
        };
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidSpec(format!("class {k} has zero samples")));
        }
        Ok(counts)
    }

    pub fn imbalance_ratio(&self) -> Result<f64> {
        let counts = self.counts()?;
        let max = *counts.iter().max().unwrap() as f64;
        let min = *counts.iter().min().unwrap() as f64;
        Ok(max / min)
    }
}

/// One labelled example with a one-hot target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Features plus one-hot (or, after mixing, soft) labels for a mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub features: Tensor,
    pub labels: Tensor,
}

impl LabeledBatch {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    class_counts: Vec<usize>,
    groups: Vec<Group>,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let (n, _) = features.dims2()?;
        if n != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{n} feature rows but {} labels",
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::InvalidDataset("need at least one class".into()));
        }
        let mut class_counts = vec![0; num_classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::InvalidDataset(format!(
                    "label {y} of row {i} is outside [0, {num_classes})"
                )));
            }
            class_counts[y] += 1;
        }
        features.ensure_finite("dataset features")?;
        let groups = assign_groups(&class_counts);
        Ok(Self {
            features,
            labels,
            num_classes,
            class_counts,
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Row indices of each class, in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }

    pub fn sample(&self, i: usize) -> Sample {
        let mut y = vec![0.0; self.num_classes];
        y[self.labels[i]] = 1.0;
        Sample {
            x: self.features.row(i).to_vec(),
            y,
        }
    }

    pub fn one_hot(&self, idx: &[usize]) -> Tensor {
        let mut data = vec![0.0; idx.len() * self.num_classes];
        for (r, &i) in idx.iter().enumerate() {
            data[r * self.num_classes + self.labels[i]] = 1.0;
        }
        Tensor::new(vec![idx.len(), self.num_classes], data).expect("non-empty index list")
    }

    pub fn batch(&self, idx: &[usize]) -> Result<LabeledBatch> {
        Ok(LabeledBatch {
            features: self.features.select_rows(idx)?,
            labels: self.one_hot(idx),
        })
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(idx)?;
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels, self.num_classes)
    }

    /// Axis-aligned bounding box `(min, max)` per feature.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let d = self.dim();
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for r in 0..self.len() {
            for (j, &v) in self.features.row(r).iter().enumerate() {
                b[j].0 = b[j].0.min(v);
                b[j].1 = b[j].1.max(v);
            }
        }
        b
    }
}

/// Built-in synthetic dataset kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Moons,
    Gaussian,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moons" | "half-moons" => Ok(SyntheticKind::Moons),
            "gaussian" | "gaussian-lt" => Ok(SyntheticKind::Gaussian),
            other => Err(Error::InvalidConfig(format!("unknown synthetic dataset `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_thresholds() {
        assert_eq!(Group::of_count(101), Group::Many);
        assert_eq!(Group::of_count(100), Group::Medium);
        assert_eq!(Group::of_count(20), Group::Medium);
        assert_eq!(Group::of_count(19), Group::Few);
        assert_eq!(Group::of_count(0), Group::Few);
    }

    #[test]
    fn exponential_profile_hand_values() {
        let spec = LongTailSpec::exponential(10, 500, 100.0);
        let counts = spec.counts().unwrap();
        // Independent evaluation of round(500 * 100^(-k/9)).
        let expected: Vec<usize> = (0..10)
            .map(|k| {
                let e = -(k as f64) / 9.0;
                (500.0 * (e * 100f64.ln()).exp()).round() as usize
            })
            .collect();
        assert_eq!(counts, expected);
        assert_eq!(counts[0], 500);
        assert_eq!(*counts.last().unwrap(), 5);
        assert_eq!(LongTailSpec::exponential(2, 1000, 100.0).counts().unwrap(), vec![1000, 10]);
        assert_eq!(LongTailSpec::exponential(4, 30, 1.0).counts().unwrap(), vec![30; 4]);
    }

    #[test]
    fn invalid_specs() {
        assert!(LongTailSpec::exponential(2, 10, 100.0).counts().is_err());
        assert!(LongTailSpec::exponential(2, 10, 0.5).counts().is_err());
        assert!(LongTailSpec::exponential(0, 10, 2.0).counts().is_err());
        assert!(LongTailSpec::explicit(vec![3, 0]).counts().is_err());
    }

    #[test]
    fn dataset_counts_and_groups() {
        let f = Tensor::zeros(&[4, 2]);
        let d = Dataset::new(f.clone(), vec![0, 1, 1, 2], 3).unwrap();
        assert_eq!(d.class_counts(), &[1, 2, 1]);
        assert_eq!(d.groups(), &[Group::Few; 3]);
        assert!(Dataset::new(f.clone(), vec![0, 1, 3, 2], 3).is_err());
        assert!(Dataset::new(f, vec![0, 1], 3).is_err());
    }

    #[test]
    fn sample_is_one_hot() {
        let f = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let d = Dataset::new(f, vec![1, 0], 3).unwrap();
        let s = d.sample(0);
        assert_eq!(s.x, vec![1.0, 2.0]);
        assert_eq!(s.y, vec![0.0, 1.0, 0.0]);
    }
}
