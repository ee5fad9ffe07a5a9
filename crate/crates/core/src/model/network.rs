use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::temperature::{softmax, TemperatureSchedule};
use crate::numerics::{forward_linear, kaiming_uniform, Graph, ParamId, ParamStore, Tensor, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            c => Err(Error::Format(format!("unknown activation code {c}"))),
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

/// Shape of the backbone and branch heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub num_classes: usize,
    /// Widths of the shared backbone layers (each followed by the activation).
    pub hidden: Vec<usize>,
    /// Widths of hidden layers inside each head, before the final linear layer.
    pub head_hidden: Vec<usize>,
    pub activation: Activation,
}

impl ModelConfig {
    /// Default desk-scale network: two 64-unit ReLU layers, linear heads.
    pub fn mlp(input_dim: usize, num_classes: usize) -> Self {
        Self {
            input_dim,
            num_classes,
            hidden: vec![64, 64],
            head_hidden: Vec::new(),
            activation: Activation::Relu,
        }
    }

    /// Three linear layers in total: two hidden layers of `width` and a linear head.
    pub fn three_layer(input_dim: usize, num_classes: usize, width: usize) -> Self {
        Self {
            hidden: vec![width, width],
            ..Self::mlp(input_dim, num_classes)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig("input dimension and class count must be positive".into()));
        }
        if self.hidden.iter().chain(&self.head_hidden).any(|&w| w == 0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn representation_dim(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input_dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    weight: ParamId,
    bias: ParamId,
}

/// A chain of dense layers. `activate_last` decides whether the final layer
/// is followed by the activation (backbone) or left linear (heads).
#[derive(Debug, Clone, PartialEq, Eq)]
struct Stack {
    layers: Vec<Dense>,
    activate_last: bool,
}

impl Stack {
    fn build<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        widths: &[usize],
        activate_last: bool,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input;
        for (i, &w) in widths.iter().enumerate() {
            let weight = store.insert(format!("{prefix}.{i}.weight"), kaiming_uniform(fan_in, w, rng));
            let bias = store.insert(format!("{prefix}.{i}.bias"), Tensor::zeros(&[w]));
            layers.push(Dense { weight, bias });
            fan_in = w;
        }
        Self { layers, activate_last }
    }

    fn forward(&self, store: &ParamStore, x: &Tensor, act: Activation) -> Result<Tensor> {
        let mut h = x.clone();
        let last = self.layers.len().saturating_sub(1);
        for (i, l) in self.layers.iter().enumerate() {
            h = forward_linear(&h, store.value(l.weight), store.value(l.bias))?;
            if i < last || self.activate_last {
                h = h.map(|v| act.apply(v));
            }
        }
        Ok(h)
    }

    fn record(&self, g: &mut Graph, store: &ParamStore, x: Var, act: Activation) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len().saturating_sub(1);
        for (i, l) in self.layers.iter().enumerate() {
            let w = g.param(store, l.weight);
            let b = g.param(store, l.bias);
            h = g.linear(h, w, b)?;
            if i < last || self.activate_last {
                h = match act {
                    Activation::Relu => g.relu(h),
                    Activation::Tanh => g.tanh(h),
                };
            }
        }
        Ok(h)
    }

    fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|l| [l.weight, l.bias])
    }
}

/// Which output an evaluation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Average of both heads (the single head for one-branch models).
    Fused,
    Conventional,
    Rebalancing,
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(Branch::Fused),
            "conventional" | "conventional-branch" => Ok(Branch::Conventional),
            "rebalancing" | "rebalancing-branch" => Ok(Branch::Rebalancing),
            other => Err(Error::InvalidConfig(format!("unknown evaluation mode `{other}`"))),
        }
    }
}

/// Fused logits and their plain softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub logits: Tensor,
    pub probabilities: Tensor,
}

/// Shared backbone with a conventional head and a re-balancing head.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBranchModel {
    config: ModelConfig,
    params: ParamStore,
    backbone: Stack,
    conventional: Stack,
    rebalancing: Stack,
    /// Temperatures used while training; never applied at inference.
    pub schedule: Option<TemperatureSchedule>,
}

impl DualBranchModel {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let backbone = Stack::build(&mut params, "backbone", config.input_dim, &config.hidden, true, rng);
        let mut head_widths = config.head_hidden.clone();
        head_widths.push(config.num_classes);
        let rep = config.representation_dim();
        let conventional = Stack::build(&mut params, "conventional", rep, &head_widths, false, rng);
        let rebalancing = Stack::build(&mut params, "rebalancing", rep, &head_widths, false, rng);
        Ok(Self {
            config,
            params,
            backbone,
            conventional,
            rebalancing,
            schedule: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn backbone_params(&self) -> Vec<ParamId> {
        self.backbone.param_ids().collect()
    }

    pub fn conventional_params(&self) -> Vec<ParamId> {
        self.conventional.param_ids().collect()
    }

    pub fn rebalancing_params(&self) -> Vec<ParamId> {
        self.rebalancing.param_ids().collect()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (_, d) = x.dims2()?;
        if d != self.config.input_dim {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {d}",
                self.config.input_dim
            )));
        }
        Ok(())
    }

    pub fn representation(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        self.backbone.forward(&self.params, x, self.config.activation)
    }

    /// Logits of both heads on the same input.
    pub fn branch_logits(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let h = self.representation(x)?;
        let act = self.config.activation;
        Ok((
            self.conventional.forward(&self.params, &h, act)?,
            self.rebalancing.forward(&self.params, &h, act)?,
        ))
    }

    /// Training-mode logits: `z_c` from the conventional head on `x_c`,
    /// `z_r` from the re-balancing head on `x_r`.
    pub fn forward_train(&self, x_c: &Tensor, x_r: &Tensor) -> Result<(Tensor, Tensor)> {
        let act = self.config.activation;
        let h_c = self.representation(x_c)?;
        let h_r = self.representation(x_r)?;
        Ok((
            self.conventional.forward(&self.params, &h_c, act)?,
            self.rebalancing.forward(&self.params, &h_r, act)?,
        ))
    }

    /// Same as [`DualBranchModel::forward_train`], recorded on a tape.
    pub fn record_train(&self, g: &mut Graph, x_c: &Tensor, x_r: &Tensor) -> Result<(Var, Var)> {
        self.check_input(x_c)?;
        self.check_input(x_r)?;
        let act = self.config.activation;
        let xc = g.input(x_c.clone());
        let xr = g.input(x_r.clone());
        let h_c = self.backbone.record(g, &self.params, xc, act)?;
        let h_r = self.backbone.record(g, &self.params, xr, act)?;
        let z_c = self.conventional.record(g, &self.params, h_c, act)?;
        let z_r = self.rebalancing.record(g, &self.params, h_r, act)?;
        Ok((z_c, z_r))
    }

    /// `z = (z_c + z_r) / 2` followed by a plain softmax.
    pub fn infer(&self, x: &Tensor) -> Result<Inference> {
        let (z_c, z_r) = self.branch_logits(x)?;
        let data = z_c
            .data()
            .iter()
            .zip(z_r.data())
            .map(|(&a, &b)| 0.5 * (a + b))
            .collect();
        let logits = Tensor::new(z_c.shape().to_vec(), data)?;
        let probabilities = softmax(&logits)?;
        Ok(Inference { logits, probabilities })
    }
}

/// Backbone plus one head.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleBranchModel {
    config: ModelConfig,
    params: ParamStore,
    backbone: Stack,
    head: Stack,
    pub schedule: Option<TemperatureSchedule>,
}

impl SingleBranchModel {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let backbone = Stack::build(&mut params, "backbone", config.input_dim, &config.hidden, true, rng);
        let mut head_widths = config.head_hidden.clone();
        head_widths.push(config.num_classes);
        let head = Stack::build(&mut params, "head", config.representation_dim(), &head_widths, false, rng);
        Ok(Self {
            config,
            params,
            backbone,
            head,
            schedule: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let (_, d) = x.dims2()?;
        if d != self.config.input_dim {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {d}",
                self.config.input_dim
            )));
        }
        let h = self.backbone.forward(&self.params, x, self.config.activation)?;
        self.head.forward(&self.params, &h, self.config.activation)
    }

    pub fn record(&self, g: &mut Graph, x: &Tensor) -> Result<Var> {
        let (_, d) = x.dims2()?;
        if d != self.config.input_dim {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {d}",
                self.config.input_dim
            )));
        }
        let act = self.config.activation;
        let xv = g.input(x.clone());
        let h = self.backbone.record(g, &self.params, xv, act)?;
        self.head.record(g, &self.params, h, act)
    }

    pub fn infer(&self, x: &Tensor) -> Result<Inference> {
        let logits = self.logits(x)?;
        let probabilities = softmax(&logits)?;
        Ok(Inference { logits, probabilities })
    }
}

/// Either network kind, as produced by training and stored in checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Single(SingleBranchModel),
    Dual(DualBranchModel),
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        match self {
            Model::Single(m) => m.config(),
            Model::Dual(m) => m.config(),
        }
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            Model::Single(m) => m.params(),
            Model::Dual(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::Single(m) => m.params_mut(),
            Model::Dual(m) => m.params_mut(),
        }
    }

    pub fn schedule(&self) -> Option<&TemperatureSchedule> {
        match self {
            Model::Single(m) => m.schedule.as_ref(),
            Model::Dual(m) => m.schedule.as_ref(),
        }
    }

    pub fn set_schedule(&mut self, schedule: Option<TemperatureSchedule>) {
        match self {
            Model::Single(m) => m.schedule = schedule,
            Model::Dual(m) => m.schedule = schedule,
        }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Inference> {
        match self {
            Model::Single(m) => m.infer(x),
            Model::Dual(m) => m.infer(x),
        }
    }

    /// Logits read by an evaluation mode. Single-branch models answer every
    /// mode with their only head.
    pub fn logits(&self, x: &Tensor, mode: Branch) -> Result<Tensor> {
        match (self, mode) {
            (Model::Single(m), _) => m.logits(x),
            (Model::Dual(m), Branch::Fused) => Ok(m.infer(x)?.logits),
            (Model::Dual(m), Branch::Conventional) => Ok(m.branch_logits(x)?.0),
            (Model::Dual(m), Branch::Rebalancing) => Ok(m.branch_logits(x)?.1),
        }
    }
}
