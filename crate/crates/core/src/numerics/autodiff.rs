//! Tape-based reverse-mode differentiation for feed-forward networks.
//!
//! A [`Graph`] records every operation as it is evaluated. Nodes are
//! appended in evaluation order, so walking the tape backwards is a valid
//! reverse topological order. Parameter leaves are bound to a
//! [`ParamStore`] and [`Graph::backward`] adds their gradients into it.

use std::collections::HashMap;

use super::{forward_linear, ParamId, ParamStore, Tensor};
use crate::{Error, Result};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Linear { input: Var, weight: Var, bias: Var },
    Relu(Var),
    Tanh(Var),
    Add(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    SquaredNorm(Var),
    /// Mean over rows of `-sum_k y_k log softmax(z / T)_k`. Keeps the
    /// row-wise probabilities for the reverse pass.
    ScaledCrossEntropy {
        logits: Var,
        targets: Tensor,
        temperatures: Vec<f64>,
        probs: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input)
    }

    /// Bind a stored parameter. Binding the same id twice returns the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        self.bound.insert(id, v);
        v
    }

    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let out = forward_linear(self.value(input), self.value(weight), self.value(bias))?;
        Ok(self.push(
            out,
            Op::Linear {
                input,
                weight,
                bias,
            },
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::tanh);
        self.push(out, Op::Tanh(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        va.same_shape(vb, "add")?;
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        out.ensure_finite("add")?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let out = self.value(x).map(|v| v * factor);
        out.ensure_finite("scale")?;
        Ok(self.push(out, Op::Scale(x, factor)))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        let out = Tensor::scalar(s);
        out.ensure_finite("sum")?;
        Ok(self.push(out, Op::Sum(x)))
    }

    /// `sum_i x_i^2`.
    pub fn squared_norm(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().map(|v| v * v).sum();
        let out = Tensor::scalar(s);
        out.ensure_finite("squared norm")?;
        Ok(self.push(out, Op::SquaredNorm(x)))
    }

    /// Batch-mean soft-label cross entropy of temperature-scaled logits.
    pub fn scaled_cross_entropy(
        &mut self,
        logits: Var,
        targets: &Tensor,
        temperatures: &[f64],
    ) -> Result<Var> {
        let z = self.value(logits);
        z.same_shape(targets, "cross entropy targets")?;
        let log_p = crate::model::scaled_log_softmax_rows(z, temperatures)?;
        let loss = crate::model::cross_entropy_from_log(&log_p, targets)?;
        let probs = log_p.map(f64::exp);
        let out = Tensor::scalar(loss);
        out.ensure_finite("cross entropy")?;
        Ok(self.push(
            out,
            Op::ScaledCrossEntropy {
                logits,
                targets: targets.clone(),
                temperatures: temperatures.to_vec(),
                probs,
            },
        ))
    }

    /// Reverse pass from a scalar node. Gradients of every reachable
    /// parameter are added to the store's accumulators.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => store.accumulate_grad(*id, &upstream)?,
                Op::Linear {
                    input,
                    weight,
                    bias,
                } => {
                    let x = self.value(*input);
                    let w = self.value(*weight);
                    let (batch, in_dim) = x.dims2()?;
                    let out_dim = w.cols();
                    let g = upstream.data();

                    let mut gx = vec![0.0; batch * in_dim];
                    let mut gw = vec![0.0; in_dim * out_dim];
                    let mut gb = vec![0.0; out_dim];
                    for b in 0..batch {
                        let grow = &g[b * out_dim..(b + 1) * out_dim];
                        for (acc, &gv) in gb.iter_mut().zip(grow) {
                            *acc += gv;
                        }
                        for d in 0..in_dim {
                            let xv = x.data()[b * in_dim + d];
                            let wrow = &w.data()[d * out_dim..(d + 1) * out_dim];
                            let gwrow = &mut gw[d * out_dim..(d + 1) * out_dim];
                            let mut s = 0.0;
                            for h in 0..out_dim {
                                s += grow[h] * wrow[h];
                                gwrow[h] += xv * grow[h];
                            }
                            gx[b * in_dim + d] = s;
                        }
                    }
                    accumulate(&mut grads, *input, Tensor::new(vec![batch, in_dim], gx)?)?;
                    accumulate(&mut grads, *weight, Tensor::new(w.shape().to_vec(), gw)?)?;
                    accumulate(
                        &mut grads,
                        *bias,
                        Tensor::new(self.value(*bias).shape().to_vec(), gb)?,
                    )?;
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let data = xv
                        .data()
                        .iter()
                        .zip(upstream.data())
                        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, Tensor::new(xv.shape().to_vec(), data)?)?;
                }
                Op::Tanh(x) => {
                    let data = node
                        .value
                        .data()
                        .iter()
                        .zip(upstream.data())
                        .map(|(&t, &g)| g * (1.0 - t * t))
                        .collect();
                    accumulate(&mut grads, *x, Tensor::new(node.value.shape().to_vec(), data)?)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, upstream.clone())?;
                    accumulate(&mut grads, *b, upstream)?;
                }
                Op::Scale(x, factor) => {
                    accumulate(&mut grads, *x, upstream.map(|g| g * factor))?;
                }
                Op::Sum(x) => {
                    let g = upstream.data()[0];
                    accumulate(&mut grads, *x, Tensor::full(self.value(*x).shape(), g))?;
                }
                Op::SquaredNorm(x) => {
                    let g = upstream.data()[0];
                    accumulate(&mut grads, *x, self.value(*x).map(|v| 2.0 * g * v))?;
                }
                Op::ScaledCrossEntropy {
                    logits,
                    targets,
                    temperatures,
                    probs,
                } => {
                    // d/dz_k of -sum_j y_j log p_j with p = softmax(z / T):
                    // (p_k * sum_j y_j - y_k) / T_k, averaged over the batch.
                    let g = upstream.data()[0];
                    let (batch, classes) = probs.dims2()?;
                    let scale = g / batch as f64;
                    let mut data = Vec::with_capacity(batch * classes);
                    for b in 0..batch {
                        let p = probs.row(b);
                        let y = targets.row(b);
                        let mass: f64 = y.iter().sum();
                        for k in 0..classes {
                            data.push(scale * (p[k] * mass - y[k]) / temperatures[k]);
                        }
                    }
                    accumulate(&mut grads, *logits, Tensor::new(vec![batch, classes], data)?)?;
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => {
            existing.same_shape(&g, "gradient")?;
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::new(vec![2, 3], vec![0.5, -1.0, 2.0, 3.0, 0.0, 1.0]).unwrap());
        let mut g = Graph::new();
        let w = g.param(&store, id);
        let loss = g.sum(w).unwrap();
        g.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(id).data(), &[1.0; 6]);
    }

    #[test]
    fn half_squared_norm_gives_value() {
        let mut store = ParamStore::new();
        let w0 = vec![0.5, -1.0, 2.0, 3.25];
        let id = store.insert("w", Tensor::new(vec![4], w0.clone()).unwrap());
        let mut g = Graph::new();
        let w = g.param(&store, id);
        let n = g.squared_norm(w).unwrap();
        let loss = g.scale(n, 0.5).unwrap();
        g.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(id).data(), w0.as_slice());
    }

    #[test]
    fn non_scalar_backward_is_contract_error() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::zeros(&[3]));
        let mut g = Graph::new();
        let w = g.param(&store, id);
        assert!(matches!(g.backward(w, &mut store), Err(Error::Contract(_))));
    }

    #[test]
    fn gradients_accumulate_across_passes() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        for _ in 0..2 {
            let mut g = Graph::new();
            let w = g.param(&store, id);
            let loss = g.sum(w).unwrap();
            g.backward(loss, &mut store).unwrap();
        }
        assert_eq!(store.grad(id).data(), &[2.0, 2.0]);
    }

    #[test]
    fn reused_param_sums_contributions() {
        // loss = sum(w) + sum(w) -> grad 2
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let mut g = Graph::new();
        let a = g.param(&store, id);
        let b = g.param(&store, id);
        assert_eq!(a, b);
        let sa = g.sum(a).unwrap();
        let sb = g.sum(b).unwrap();
        let loss = g.add(sa, sb).unwrap();
        g.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(id).data(), &[2.0; 3]);
    }
}
