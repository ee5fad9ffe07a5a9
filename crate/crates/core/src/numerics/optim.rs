use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Slot {
    name: String,
    value: Tensor,
    grad: Tensor,
    velocity: Tensor,
}

/// Named parameters with a gradient accumulator and a momentum buffer each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    slots: Vec<Slot>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let grad = Tensor::zeros(value.shape());
        let velocity = Tensor::zeros(value.shape());
        self.slots.push(Slot {
            name: name.into(),
            value,
            grad,
            velocity,
        });
        ParamId(self.slots.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.slots.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].value
    }

    /// Replace a parameter's value; the new tensor must keep the old shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let slot = &mut self.slots[id.0];
        slot.value.same_shape(&value, &slot.name)?;
        slot.value = value;
        Ok(())
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.slots[id.0].value.data_mut()
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].grad
    }

    pub fn velocity(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].velocity
    }

    pub fn accumulate_grad(&mut self, id: ParamId, grad: &Tensor) -> Result<()> {
        let slot = &mut self.slots[id.0];
        slot.grad.same_shape(grad, &slot.name)?;
        for (g, d) in slot.grad.data_mut().iter_mut().zip(grad.data()) {
            *g += d;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for slot in &mut self.slots {
            slot.grad.data_mut().fill(0.0);
        }
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    /// Concatenation of every parameter, in insertion order.
    pub fn flatten(&self) -> Vec<f64> {
        self.slots
            .iter()
            .flat_map(|s| s.value.data().iter().copied())
            .collect()
    }

    pub fn flatten_grad(&self) -> Vec<f64> {
        self.slots
            .iter()
            .flat_map(|s| s.grad.data().iter().copied())
            .collect()
    }

    /// Inverse of [`ParamStore::flatten`].
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::Dimension(format!(
                "expected {} parameter values, got {}",
                self.num_scalars(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for slot in &mut self.slots {
            let n = slot.value.len();
            slot.value.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// SGD with heavy-ball momentum, L2 weight decay folded into the gradient,
/// and a piecewise-constant learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 2e-4,
            decay_epochs: vec![120, 160],
            decay_factor: 0.1,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "decay factor must be positive, got {}",
                self.decay_factor
            )));
        }
        if self.decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "decay epochs must be strictly increasing, got {:?}",
                self.decay_epochs
            )));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based). A decay epoch `e`
    /// applies from epoch `e` onwards.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let passed = self.decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.learning_rate * self.decay_factor.powi(passed as i32)
    }
}

/// One optimizer update over every parameter in the store:
/// `v <- momentum * v + grad + weight_decay * param`, `param <- param - lr(epoch) * v`.
pub fn sgd_step(store: &mut ParamStore, config: &SgdConfig, epoch: usize) {
    let lr = config.learning_rate_at(epoch);
    for slot in &mut store.slots {
        let value = slot.value.data_mut();
        let grad = slot.grad.data();
        let velocity = slot.velocity.data_mut();
        for ((p, &g), v) in value.iter_mut().zip(grad).zip(velocity.iter_mut()) {
            *v = config.momentum * *v + g + config.weight_decay * *p;
            *p -= lr * *v;
        }
    }
}
