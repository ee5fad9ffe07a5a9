//! Accuracy by class and by class-size group, and decision-boundary grids.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, Group};
use crate::model::{Branch, Model};
use crate::numerics::Tensor;
use crate::{Error, Result};

/// Top-1 accuracy overall, per class (recall), and averaged over the
/// classes of each group. A group with no member classes is `None`, as is a
/// class absent from the evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedAccuracy {
    pub all: f64,
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
    pub per_class: Vec<Option<f64>>,
    /// Group of each class, taken from the training counts.
    pub groups: Vec<Group>,
}

impl GroupedAccuracy {
    pub fn from_predictions(predictions: &[usize], labels: &[usize], groups: &[Group]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::InvalidDataset("nothing to evaluate".into()));
        }
        let k = groups.len();
        let mut hits = vec![0usize; k];
        let mut totals = vec![0usize; k];
        for (&p, &y) in predictions.iter().zip(labels) {
            if y >= k {
                return Err(Error::Dimension(format!("label {y} outside {k} classes")));
            }
            totals[y] += 1;
            if p == y {
                hits[y] += 1;
            }
        }
        let correct: usize = hits.iter().sum();
        let per_class: Vec<Option<f64>> = hits
            .iter()
            .zip(&totals)
            .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
            .collect();
        let group_mean = |g: Group| {
            let vals: Vec<f64> = per_class
                .iter()
                .zip(groups)
                .filter(|(_, &cg)| cg == g)
                .filter_map(|(v, _)| *v)
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        Ok(Self {
            all: correct as f64 / labels.len() as f64,
            many: group_mean(Group::Many),
            medium: group_mean(Group::Medium),
            few: group_mean(Group::Few),
            per_class,
            groups: groups.to_vec(),
        })
    }

    /// Unweighted mean of the per-class accuracies that are defined.
    pub fn mean_per_class(&self) -> f64 {
        let vals: Vec<f64> = self.per_class.iter().filter_map(|v| *v).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    /// `class,group,accuracy` rows, then `all`, `many`, `medium`, `few` summary rows.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        fn cell(v: Option<f64>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        writeln!(w, "class,group,accuracy")?;
        for (k, (acc, g)) in self.per_class.iter().zip(&self.groups).enumerate() {
            writeln!(w, "{k},{g},{}", cell(*acc))?;
        }
        writeln!(w, "all,,{}", self.all)?;
        writeln!(w, "many,,{}", cell(self.many))?;
        writeln!(w, "medium,,{}", cell(self.medium))?;
        writeln!(w, "few,,{}", cell(self.few))
    }
}

/// Evaluate `model` on `test`. `train_groups` assigns classes to groups
/// (computed from the training set, since test sets are balanced).
pub fn evaluate(model: &Model, test: &Dataset, train_groups: &[Group], mode: Branch) -> Result<GroupedAccuracy> {
    let k = model.config().num_classes;
    if test.num_classes() != k || train_groups.len() != k {
        return Err(Error::Dimension(format!(
            "model has {k} classes, test set {}, group table {}",
            test.num_classes(),
            train_groups.len()
        )));
    }
    let logits = model.logits(test.features(), mode)?;
    GroupedAccuracy::from_predictions(&logits.argmax_rows(), test.labels(), train_groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub pred: usize,
    pub p0: f64,
}

/// Fused predictions over a regular grid covering a 2-D dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: usize,
    /// Row-major over y, then x.
    pub cells: Vec<GridCell>,
}

impl BoundaryGrid {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "x,y,pred,p0")?;
        for c in &self.cells {
            writeln!(w, "{},{},{},{}", c.x, c.y, c.pred, c.p0)?;
        }
        Ok(())
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Evaluate fused inference on a `resolution x resolution` grid spanning the
/// dataset's bounding box widened by `margin` on every side.
pub fn export_boundary(model: &Model, dataset: &Dataset, resolution: usize, margin: f64) -> Result<BoundaryGrid> {
    if dataset.dim() != 2 {
        return Err(Error::UnsupportedDimension(dataset.dim()));
    }
    if resolution == 0 {
        return Err(Error::InvalidConfig("grid resolution must be positive".into()));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::InvalidConfig(format!("margin must be >= 0, got {margin}")));
    }
    let b = dataset.bounds();
    let x_range = (b[0].0 - margin, b[0].1 + margin);
    let y_range = (b[1].0 - margin, b[1].1 + margin);
    let xs = axis(x_range.0, x_range.1, resolution);
    let ys = axis(y_range.0, y_range.1, resolution);
    let mut points = Vec::with_capacity(2 * resolution * resolution);
    for &y in &ys {
        for &x in &xs {
            points.push(x);
            points.push(y);
        }
    }
    let grid = Tensor::new(vec![resolution * resolution, 2], points)?;
    let inference = model.infer(&grid)?;
    let preds = inference.logits.argmax_rows();
    let cells = preds
        .iter()
        .enumerate()
        .map(|(i, &pred)| GridCell {
            x: grid.get2(i, 0),
            y: grid.get2(i, 1),
            pred,
            p0: inference.probabilities.get2(i, 0),
        })
        .collect();
    Ok(BoundaryGrid {
        x_range,
        y_range,
        resolution,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_classifiers() {
        let labels = vec![0, 0, 1, 1, 2, 2];
        let groups = vec![Group::Many, Group::Medium, Group::Few];
        let acc = GroupedAccuracy::from_predictions(&labels, &labels, &groups).unwrap();
        assert_eq!(acc.all, 1.0);
        assert_eq!((acc.many, acc.medium, acc.few), (Some(1.0), Some(1.0), Some(1.0)));

        let constant = vec![0; 6];
        let acc = GroupedAccuracy::from_predictions(&constant, &labels, &groups).unwrap();
        assert!((acc.all - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(acc.per_class, vec![Some(1.0), Some(0.0), Some(0.0)]);
        assert!((acc.all - acc.mean_per_class()).abs() < 1e-15);
    }

    #[test]
    fn empty_group_is_none() {
        let labels = vec![0, 1];
        let acc = GroupedAccuracy::from_predictions(&labels, &labels, &[Group::Few, Group::Few]).unwrap();
        assert_eq!(acc.many, None);
        assert_eq!(acc.few, Some(1.0));
    }

    #[test]
    fn csv_layout() {
        let labels = vec![0, 1];
        let acc = GroupedAccuracy::from_predictions(&[0, 0], &labels, &[Group::Many, Group::Few]).unwrap();
        let mut out = Vec::new();
        acc.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "class,group,accuracy\n0,many,1\n1,few,0\nall,,0.5\nmany,,1\nmedium,,\nfew,,0\n"
        );
    }

    #[test]
    fn axis_endpoints_exact() {
        let a = axis(-1.3, 2.7, 5);
        assert_eq!(a[0], -1.3);
        assert_eq!(a[4], 2.7);
        assert_eq!(axis(0.0, 1.0, 1), vec![0.5]);
    }
}
