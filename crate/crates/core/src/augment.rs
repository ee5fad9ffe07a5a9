//! Mixup augmentation: classic mixup, bilateral mixup between a uniform and
//! a re-balanced batch, and the single-branch variant of the latter.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::datasets::LabeledBatch;
use crate::numerics::Tensor;
use crate::{Error, Result};

/// Mixed features with soft labels.
pub type MixedBatch = LabeledBatch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixupConfig {
    /// Shape of the symmetric `Beta(alpha, alpha)` mixing law.
    pub alpha: f64,
    /// One coefficient for the whole batch instead of one per example.
    pub per_batch: bool,
}

impl Default for MixupConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            per_batch: false,
        }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mixup alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn beta(&self) -> Result<Beta<f64>> {
        self.validate()?;
        Beta::new(self.alpha, self.alpha).map_err(|e| Error::InvalidConfig(format!("beta law: {e}")))
    }

    /// Raw mixing coefficients for a batch of `n` examples.
    pub fn draw_lambdas<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let beta = self.beta()?;
        Ok(if self.per_batch {
            vec![beta.sample(rng); n]
        } else {
            (0..n).map(|_| beta.sample(rng)).collect()
        })
    }
}

/// A raw coefficient `lambda` and the bilateral pair derived from it:
/// `lambda_c = max(lambda, 1 - lambda)`, `lambda_r = min(lambda, 1 - lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixCoefficients {
    pub lambda: f64,
    pub lambda_c: f64,
    pub lambda_r: f64,
}

impl MixCoefficients {
    pub fn from_lambda(lambda: f64) -> Self {
        let other = 1.0 - lambda;
        let (lambda_c, lambda_r) = if lambda >= other {
            (lambda, other)
        } else {
            (other, lambda)
        };
        Self {
            lambda,
            lambda_c,
            lambda_r,
        }
    }
}

pub fn draw_coefficients<R: Rng + ?Sized>(config: &MixupConfig, rng: &mut R) -> Result<MixCoefficients> {
    let lambda = config.beta()?.sample(rng);
    Ok(MixCoefficients::from_lambda(lambda))
}

#[inline]
fn mix(w: f64, a: f64, b: f64) -> f64 {
    if w == 1.0 {
        a
    } else if w == 0.0 {
        b
    } else {
        w * a + (1.0 - w) * b
    }
}

fn combine_rows(a: &Tensor, b: &Tensor, weights: &[f64]) -> Result<Tensor> {
    let cols = a.cols();
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .enumerate()
        .map(|(i, (&x, &y))| mix(weights[i / cols], x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Row `i` of the result is `w_i * a_i + (1 - w_i) * b_i`, for features and
/// labels alike. Weights of exactly 0 or 1 copy a parent row bit for bit.
pub fn convex_combine(a: &LabeledBatch, b: &LabeledBatch, weights: &[f64]) -> Result<MixedBatch> {
    a.features.same_shape(&b.features, "mixup features")?;
    a.labels.same_shape(&b.labels, "mixup labels")?;
    if weights.len() != a.len() {
        return Err(Error::Dimension(format!(
            "{} mixing weights for {} rows",
            weights.len(),
            a.len()
        )));
    }
    Ok(LabeledBatch {
        features: combine_rows(&a.features, &b.features, weights)?,
        labels: combine_rows(&a.labels, &b.labels, weights)?,
    })
}

/// Classic mixup of two batches with `lambda ~ Beta(alpha, alpha)`.
pub fn mixup_classic<R: Rng + ?Sized>(
    batch_i: &LabeledBatch,
    batch_j: &LabeledBatch,
    config: &MixupConfig,
    rng: &mut R,
) -> Result<MixedBatch> {
    batch_i.features.same_shape(&batch_j.features, "mixup features")?;
    let lambdas = config.draw_lambdas(batch_i.len(), rng)?;
    convex_combine(batch_i, batch_j, &lambdas)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilateralMix {
    /// Dominated by the uniform-sampler batch; feeds the conventional branch.
    pub conventional: MixedBatch,
    /// Dominated by the re-balanced batch; feeds the re-balancing branch.
    pub rebalancing: MixedBatch,
    pub coefficients: Vec<MixCoefficients>,
}

/// Bilateral mixup. From a single `lambda` per example, the conventional
/// output weights the uniform sample by `lambda_c >= 0.5` and the
/// re-balancing output weights it by `lambda_r <= 0.5`.
pub fn bilateral_mix<R: Rng + ?Sized>(
    uniform: &LabeledBatch,
    rebalanced: &LabeledBatch,
    config: &MixupConfig,
    rng: &mut R,
) -> Result<BilateralMix> {
    uniform.features.same_shape(&rebalanced.features, "bilateral mixup features")?;
    let coefficients: Vec<MixCoefficients> = config
        .draw_lambdas(uniform.len(), rng)?
        .into_iter()
        .map(MixCoefficients::from_lambda)
        .collect();
    bilateral_with(uniform, rebalanced, coefficients)
}

/// Bilateral mixup with caller-supplied coefficients.
pub fn bilateral_with(
    uniform: &LabeledBatch,
    rebalanced: &LabeledBatch,
    coefficients: Vec<MixCoefficients>,
) -> Result<BilateralMix> {
    let wc: Vec<f64> = coefficients.iter().map(|c| c.lambda_c).collect();
    let wr: Vec<f64> = coefficients.iter().map(|c| c.lambda_r).collect();
    Ok(BilateralMix {
        conventional: convex_combine(uniform, rebalanced, &wc)?,
        rebalancing: convex_combine(uniform, rebalanced, &wr)?,
        coefficients,
    })
}

/// Single-branch variant: one combination with the raw `lambda`
/// weighting the uniform sample.
pub fn sbn_mix<R: Rng + ?Sized>(
    uniform: &LabeledBatch,
    rebalanced: &LabeledBatch,
    config: &MixupConfig,
    rng: &mut R,
) -> Result<MixedBatch> {
    uniform.features.same_shape(&rebalanced.features, "mixup features")?;
    let lambdas = config.draw_lambdas(uniform.len(), rng)?;
    convex_combine(uniform, rebalanced, &lambdas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};

    fn batch(features: Vec<Vec<f64>>, labels: Vec<Vec<f64>>) -> LabeledBatch {
        LabeledBatch {
            features: Tensor::from_rows(&features).unwrap(),
            labels: Tensor::from_rows(&labels).unwrap(),
        }
    }

    fn pair() -> (LabeledBatch, LabeledBatch) {
        (
            batch(vec![vec![1.0, -0.0], vec![2.0, 3.0]], vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]),
            batch(vec![vec![-4.0, 0.5], vec![0.0, 1.0]], vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]),
        )
    }

    #[test]
    fn coefficient_definitions() {
        let c = MixCoefficients::from_lambda(0.3);
        assert_eq!((c.lambda_c, c.lambda_r), (0.7, 0.3));
        let c = MixCoefficients::from_lambda(0.5);
        assert_eq!((c.lambda_c, c.lambda_r), (0.5, 0.5));
        let c = MixCoefficients::from_lambda(0.9);
        assert_eq!(c.lambda_c, 0.9);
        assert!((c.lambda_r - 0.1).abs() < 1e-16);
    }

    #[test]
    fn classic_endpoint_and_midpoint() {
        let (a, b) = pair();
        assert_eq!(convex_combine(&a, &b, &[1.0, 1.0]).unwrap(), a);
        assert_eq!(convex_combine(&a, &b, &[0.0, 0.0]).unwrap(), b);
        let m = convex_combine(&a, &b, &[0.5, 0.5]).unwrap();
        assert_eq!(m.labels.row(0), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn bilateral_endpoints() {
        let (c, r) = pair();
        let coeffs = vec![MixCoefficients::from_lambda(1.0); 2];
        let m = bilateral_with(&c, &r, coeffs).unwrap();
        assert_eq!(m.conventional, c);
        assert_eq!(m.rebalancing, r);
        // lambda = 0 gives the same split: lambda_c = 1 - 0
        let m = bilateral_with(&c, &r, vec![MixCoefficients::from_lambda(0.0); 2]).unwrap();
        assert_eq!(m.conventional, c);
        assert_eq!(m.rebalancing, r);
        let m = bilateral_with(&c, &r, vec![MixCoefficients::from_lambda(0.5); 2]).unwrap();
        assert_eq!(m.conventional, m.rebalancing);
    }

    #[test]
    fn sbn_endpoints() {
        let (c, r) = pair();
        assert_eq!(convex_combine(&c, &r, &[0.0, 0.0]).unwrap(), r);
        assert_eq!(convex_combine(&c, &r, &[1.0, 1.0]).unwrap(), c);
    }

    #[test]
    fn shape_mismatch() {
        let (a, _) = pair();
        let b = batch(vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]], vec![vec![1.0, 0.0, 0.0]; 2]);
        let mut rng = rng::stream(0, Stream::Mixup);
        let cfg = MixupConfig::default();
        assert!(mixup_classic(&a, &b, &cfg, &mut rng).is_err());
        assert!(bilateral_mix(&a, &b, &cfg, &mut rng).is_err());
        assert!(sbn_mix(&a, &b, &cfg, &mut rng).is_err());
        assert!(convex_combine(&a, &a, &[0.5]).is_err());
    }

    #[test]
    fn invalid_alpha() {
        let mut rng = rng::stream(0, Stream::Mixup);
        let cfg = MixupConfig {
            alpha: 0.0,
            per_batch: false,
        };
        assert!(draw_coefficients(&cfg, &mut rng).is_err());
    }

    #[test]
    fn per_batch_flag_shares_lambda() {
        let mut rng = rng::stream(4, Stream::Mixup);
        let cfg = MixupConfig {
            alpha: 1.0,
            per_batch: true,
        };
        let l = cfg.draw_lambdas(5, &mut rng).unwrap();
        assert!(l.iter().all(|&v| v == l[0]));
        let l = MixupConfig::default().draw_lambdas(5, &mut rng).unwrap();
        assert!(l.iter().any(|&v| v != l[0]));
    }

    #[test]
    fn mean_of_lambda_c_for_uniform_lambda() {
        // E[max(U, 1 - U)] = 3/4 and Var = 1/48 for U ~ U(0, 1)
        let mut rng = rng::stream(12, Stream::Mixup);
        let cfg = MixupConfig::default();
        let n = 100_000;
        let mean = (0..n)
            .map(|_| draw_coefficients(&cfg, &mut rng).unwrap().lambda_c)
            .sum::<f64>()
            / n as f64;
        let sigma = (1.0f64 / 48.0 / n as f64).sqrt();
        assert!((mean - 0.75).abs() < 3.0 * sigma, "mean {mean}");
    }
}
