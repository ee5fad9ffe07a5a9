use serde::{Deserialize, Serialize};

use crate::numerics::Tensor;
use crate::{Error, Result};

/// Per-class softmax temperatures used during training.
///
/// `B_k = eps * N_k / N_max + (1 - eps)` and `T_k = (max_j B_j / B_k)^(1 / eta)`,
/// so the largest class gets `T = 1` and rarer classes get hotter logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub eta: f64,
    pub epsilon: f64,
    pub class_counts: Vec<usize>,
    pub balance: Vec<f64>,
    pub temperatures: Vec<f64>,
}

impl TemperatureSchedule {
    /// All temperatures 1: training without class-wise scaling.
    pub fn identity(num_classes: usize) -> Self {
        Self {
            eta: 1.0,
            epsilon: 0.0,
            class_counts: Vec::new(),
            balance: vec![1.0; num_classes],
            temperatures: vec![1.0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.temperatures.len()
    }

    pub fn is_identity(&self) -> bool {
        self.temperatures.iter().all(|&t| t == 1.0)
    }
}

pub fn temperatures(eta: f64, epsilon: f64, class_counts: &[usize]) -> Result<TemperatureSchedule> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if class_counts.is_empty() || class_counts.contains(&0) {
        return Err(Error::InvalidConfig("class counts must be positive".into()));
    }
    let n_max = *class_counts.iter().max().unwrap() as f64;
    let balance: Vec<f64> = class_counts
        .iter()
        .map(|&n| epsilon * n as f64 / n_max + (1.0 - epsilon))
        .collect();
    let b_max = balance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let temperatures = balance.iter().map(|&b| (b_max / b).powf(1.0 / eta)).collect();
    Ok(TemperatureSchedule {
        eta,
        epsilon,
        class_counts: class_counts.to_vec(),
        balance,
        temperatures,
    })
}

/// Row-wise `log softmax(z_k / T_k)`, stabilized by the row max of the
/// scaled logits.
pub(crate) fn scaled_log_softmax_rows(z: &Tensor, temperatures: &[f64]) -> Result<Tensor> {
    let (rows, cols) = z.dims2()?;
    if cols != temperatures.len() {
        return Err(Error::Dimension(format!(
            "{cols} logits per row but {} temperatures",
            temperatures.len()
        )));
    }
    z.ensure_finite("logits")?;
    let mut out = Vec::with_capacity(rows * cols);
    let mut scaled = vec![0.0; cols];
    for r in 0..rows {
        for ((s, &v), &t) in scaled.iter_mut().zip(z.row(r)).zip(temperatures) {
            *s = v / t;
        }
        let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = scaled.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
        out.extend(scaled.iter().map(|s| s - m - lse));
    }
    Tensor::new(vec![rows, cols], out)
}

/// Row-wise `softmax(z_k / T_k)`.
pub fn scaled_softmax_rows(z: &Tensor, temperatures: &[f64]) -> Result<Tensor> {
    let (rows, cols) = z.dims2()?;
    if cols != temperatures.len() {
        return Err(Error::Dimension(format!(
            "{cols} logits per row but {} temperatures",
            temperatures.len()
        )));
    }
    z.ensure_finite("logits")?;
    let mut out = Vec::with_capacity(rows * cols);
    let mut scaled = vec![0.0; cols];
    for r in 0..rows {
        for ((s, &v), &t) in scaled.iter_mut().zip(z.row(r)).zip(temperatures) {
            *s = v / t;
        }
        let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        out.extend(scaled.iter().map(|s| (s - m).exp()));
        let total: f64 = out[start..].iter().sum();
        for p in &mut out[start..] {
            *p /= total;
        }
    }
    Tensor::new(vec![rows, cols], out)
}

/// Probabilities produced by temperature-scaled softmax; rows sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledProbabilities(pub Tensor);

impl ScaledProbabilities {
    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

pub fn scaled_softmax(z: &Tensor, schedule: &TemperatureSchedule) -> Result<ScaledProbabilities> {
    scaled_softmax_rows(z, &schedule.temperatures).map(ScaledProbabilities)
}

/// Plain softmax (all temperatures 1).
pub fn softmax(z: &Tensor) -> Result<Tensor> {
    scaled_softmax_rows(z, &vec![1.0; z.cols()])
}

/// Batch-mean soft-label cross entropy `-sum_k y_k log p_k`.
pub fn cross_entropy(p: &Tensor, y: &Tensor) -> Result<f64> {
    p.same_shape(y, "cross entropy")?;
    if let Some(bad) = p.data().iter().find(|&&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "cross entropy needs strictly positive probabilities, found {bad}"
        )));
    }
    let rows = p.rows();
    let total: f64 = p
        .data()
        .iter()
        .zip(y.data())
        .map(|(&pv, &yv)| if yv == 0.0 { 0.0 } else { -yv * pv.ln() })
        .sum();
    Ok(total / rows as f64)
}

/// Batch-mean cross entropy from log-probabilities.
pub(crate) fn cross_entropy_from_log(log_p: &Tensor, y: &Tensor) -> Result<f64> {
    log_p.same_shape(y, "cross entropy")?;
    let total: f64 = log_p
        .data()
        .iter()
        .zip(y.data())
        .map(|(&lp, &yv)| if yv == 0.0 { 0.0 } else { -yv * lp })
        .sum();
    Ok(total / log_p.rows() as f64)
}

/// Dual-branch objective: the mean of the two branch cross entropies.
pub fn dbn_loss(p_c: &Tensor, y_c: &Tensor, p_r: &Tensor, y_r: &Tensor) -> Result<f64> {
    Ok(0.5 * cross_entropy(p_c, y_c)? + 0.5 * cross_entropy(p_r, y_r)?)
}
