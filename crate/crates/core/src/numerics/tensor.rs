use std::fmt;

use crate::{Error, Result};

/// Dense row-major `f64` tensor.
///
/// Most of the crate only needs rank 1 and rank 2, but the shape is kept
/// general so parameter files can store anything.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Dimension(format!(
                "shape {shape:?} must be non-empty with positive extents"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::Dimension(format!("expected a matrix, got shape {other:?}"))),
        }
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn get2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    /// Gather rows by index into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let (rows, cols) = self.dims2()?;
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            if i >= rows {
                return Err(Error::Dimension(format!("row {i} out of range for {rows} rows")));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(vec![idx.len(), cols], data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Error unless every entry is finite. `what` names the producer in the message.
    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// Index of the largest entry in each row; ties go to the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows())
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (k, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    pub fn same_shape(&self, other: &Tensor, what: &str) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape, other.shape
            )))
        }
    }
}

/// `output[b,h] = sum_d input[b,d] * weight[d,h] + bias[h]`.
pub fn forward_linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (batch, in_dim) = input.dims2()?;
    let (w_in, out_dim) = weight.dims2()?;
    if w_in != in_dim {
        return Err(Error::Dimension(format!(
            "input has {in_dim} features but weight expects {w_in}"
        )));
    }
    if bias.len() != out_dim {
        return Err(Error::Dimension(format!(
            "bias has {} entries, expected {out_dim}",
            bias.len()
        )));
    }
    let x = input.data();
    let w = weight.data();
    let mut out = Vec::with_capacity(batch * out_dim);
    for b in 0..batch {
        out.extend_from_slice(bias.data());
        let row = &mut out[b * out_dim..];
        for d in 0..in_dim {
            let xv = x[b * in_dim + d];
            if xv == 0.0 {
                continue;
            }
            let wrow = &w[d * out_dim..(d + 1) * out_dim];
            for (o, &wv) in row.iter_mut().zip(wrow) {
                *o += xv * wv;
            }
        }
    }
    let out = Tensor::new(vec![batch, out_dim], out)?;
    out.ensure_finite("linear layer output")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![0, 3], vec![]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn identity_like_linear() {
        let x = Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let w = Tensor::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let b = Tensor::zeros(&[2]);
        let y = forward_linear(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[2.0, 0.0]);
    }

    #[test]
    fn zero_input_gives_bias_rows() {
        let x = Tensor::zeros(&[3, 4]);
        let w = Tensor::new(vec![4, 2], (0..8).map(|v| v as f64 - 3.5).collect()).unwrap();
        let b = Tensor::new(vec![2], vec![0.25, -1.5]).unwrap();
        let y = forward_linear(&x, &w, &b).unwrap();
        for r in 0..3 {
            assert_eq!(y.row(r), b.data());
        }
    }

    #[test]
    fn linear_shape_errors() {
        let x = Tensor::zeros(&[3, 4]);
        let w = Tensor::zeros(&[3, 2]);
        let b = Tensor::zeros(&[2]);
        assert!(matches!(forward_linear(&x, &w, &b), Err(Error::Dimension(_))));
        let w = Tensor::zeros(&[4, 2]);
        let b = Tensor::zeros(&[3]);
        assert!(matches!(forward_linear(&x, &w, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let x = Tensor::full(&[1, 2], f64::MAX);
        let w = Tensor::full(&[2, 1], 10.0);
        let b = Tensor::zeros(&[1]);
        assert!(matches!(forward_linear(&x, &w, &b), Err(Error::NonFinite(_))));
    }

    #[test]
    fn argmax_ties_pick_first() {
        let t = Tensor::from_rows(&[vec![1.0, 3.0, 3.0], vec![2.0, 2.0, 1.0]]).unwrap();
        assert_eq!(t.argmax_rows(), vec![1, 0]);
    }
}
