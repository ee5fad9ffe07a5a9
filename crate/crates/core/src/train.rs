//! End-to-end training: run configuration, the per-step pipeline for every
//! method, per-epoch evaluation, run records and hyperparameter sweeps.
//!
//! One dual-branch step draws a uniform batch and a re-balanced batch, mixes
//! them bilaterally, runs both branches, applies the class-wise temperatures,
//! takes the half/half cross entropy, back-propagates and updates with SGD.
//! The two ablation toggles replace the mixing stage with a pass-through and
//! the temperatures with ones.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{bilateral_mix, mixup_classic, sbn_mix, MixupConfig};
use crate::datasets::{assign_groups, Dataset, LabeledBatch};
use crate::eval::{evaluate, GroupedAccuracy};
use crate::model::{
    record_dbn_loss, record_sbn_loss, temperatures, Activation, Branch, DualBranchModel, Model, ModelConfig,
    SingleBranchModel, TemperatureSchedule,
};
use crate::numerics::{sgd_step, Graph, SgdConfig};
use crate::rng::{self, Stream};
use crate::sampling::{sampler_distribution, BatchSpec, Gamma, RebalancedSampler, RebalancedSamplerConfig, UniformSampler};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Single head, uniform sampling, plain cross entropy.
    Erm,
    /// Single head, classic mixup of two uniform batches.
    Mixup,
    /// Single head trained on one mix of a uniform and a re-balanced batch.
    SbnMix,
    /// Dual branch; mixing and temperatures off unless toggled on.
    Dbn,
    /// Dual branch with bilateral mixup and temperatures.
    DbnMix,
}

impl Method {
    pub fn is_dual(self) -> bool {
        matches!(self, Method::Dbn | Method::DbnMix)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::Mixup => "mixup",
            Method::SbnMix => "sbn-mix",
            Method::Dbn => "dbn",
            Method::DbnMix => "dbn-mix",
        }
    }

    fn default_toggles(self) -> Option<Toggles> {
        match self {
            Method::Erm | Method::Mixup => None,
            Method::Dbn => Some(Toggles {
                bilateral_mixup: false,
                temperature_scaling: false,
            }),
            Method::SbnMix | Method::DbnMix => Some(Toggles {
                bilateral_mixup: true,
                temperature_scaling: true,
            }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "erm" => Ok(Method::Erm),
            "mixup" => Ok(Method::Mixup),
            "sbn-mix" => Ok(Method::SbnMix),
            "dbn" => Ok(Method::Dbn),
            "dbn-mix" => Ok(Method::DbnMix),
            other => Err(Error::InvalidConfig(format!(
                "unknown method `{other}`; expected erm, mixup, sbn-mix, dbn or dbn-mix"
            ))),
        }
    }
}

/// Resolved ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub bilateral_mixup: bool,
    pub temperature_scaling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    /// `batch.seed` is ignored; every random stream derives from `seed`.
    pub batch: BatchSpec,
    pub sgd: SgdConfig,
    pub mixup: MixupConfig,
    pub gamma: Gamma,
    pub eta: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// `None` takes the method default.
    pub bilateral_mixup: Option<bool>,
    pub temperature_scaling: Option<bool>,
    pub hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::DbnMix,
            epochs: 200,
            batch: BatchSpec::default(),
            sgd: SgdConfig::default(),
            mixup: MixupConfig::default(),
            gamma: Gamma::Infinite,
            eta: 3.0,
            epsilon: 0.6,
            seed: 0,
            bilateral_mixup: None,
            temperature_scaling: None,
            hidden: vec![64, 64],
            head_hidden: Vec::new(),
            activation: Activation::Relu,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: expected a boolean, got `{v}`"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse `{v}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn join_list(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Split flat `key = value` text into pairs. Blank lines and `#` comments
/// are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

impl TrainConfig {
    /// Set one field from its textual key. Dashes and underscores in keys
    /// are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "method" => self.method = v.parse()?,
            "epochs" => self.epochs = parse_num(&key, v)?,
            "batch_size" => self.batch.batch_size = parse_num(&key, v)?,
            "drop_last" => self.batch.drop_last = parse_bool(&key, v)?,
            "lr" | "learning_rate" => self.sgd.learning_rate = parse_num(&key, v)?,
            "momentum" => self.sgd.momentum = parse_num(&key, v)?,
            "weight_decay" => self.sgd.weight_decay = parse_num(&key, v)?,
            "decay_epochs" => self.sgd.decay_epochs = parse_list(&key, v)?,
            "decay_factor" => self.sgd.decay_factor = parse_num(&key, v)?,
            "alpha" => self.mixup.alpha = parse_num(&key, v)?,
            "per_batch_lambda" => self.mixup.per_batch = parse_bool(&key, v)?,
            "gamma" => self.gamma = v.parse()?,
            "eta" => self.eta = parse_num(&key, v)?,
            "epsilon" => self.epsilon = parse_num(&key, v)?,
            "seed" => self.seed = parse_num(&key, v)?,
            "bilateral_mixup" => self.bilateral_mixup = Some(parse_bool(&key, v)?),
            "temperature_scaling" => self.temperature_scaling = Some(parse_bool(&key, v)?),
            "hidden" => self.hidden = parse_list(&key, v)?,
            "head_hidden" => self.head_hidden = parse_list(&key, v)?,
            "activation" => self.activation = v.parse()?,
            _ => return Err(Error::InvalidConfig(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_config_text(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Every field as `key = value` lines; `apply_text` on a default config
    /// reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("method = {}", self.method),
            format!("epochs = {}", self.epochs),
            format!("batch_size = {}", self.batch.batch_size),
            format!("drop_last = {}", self.batch.drop_last),
            format!("lr = {:?}", self.sgd.learning_rate),
            format!("momentum = {:?}", self.sgd.momentum),
            format!("weight_decay = {:?}", self.sgd.weight_decay),
            format!("decay_epochs = {}", join_list(&self.sgd.decay_epochs)),
            format!("decay_factor = {:?}", self.sgd.decay_factor),
            format!("alpha = {:?}", self.mixup.alpha),
            format!("per_batch_lambda = {}", self.mixup.per_batch),
            format!(
                "gamma = {}",
                match self.gamma {
                    Gamma::Finite(g) => format!("{g:?}"),
                    Gamma::Infinite => "inf".into(),
                }
            ),
            format!("eta = {:?}", self.eta),
            format!("epsilon = {:?}", self.epsilon),
            format!("seed = {}", self.seed),
        ];
        if let Some(b) = self.bilateral_mixup {
            lines.push(format!("bilateral_mixup = {b}"));
        }
        if let Some(t) = self.temperature_scaling {
            lines.push(format!("temperature_scaling = {t}"));
        }
        lines.push(format!("hidden = {}", join_list(&self.hidden)));
        lines.push(format!("head_hidden = {}", join_list(&self.head_hidden)));
        lines.push(format!("activation = {}", self.activation));
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }

    /// Ablation switches after applying method defaults. Single-head
    /// baselines without a mixing stage reject explicit toggles.
    pub fn toggles(&self) -> Result<Toggles> {
        match self.method.default_toggles() {
            None => {
                if self.bilateral_mixup.is_some() || self.temperature_scaling.is_some() {
                    Err(Error::InvalidConfig(format!(
                        "ablation toggles do not apply to method {}",
                        self.method
                    )))
                } else {
                    Ok(Toggles {
                        bilateral_mixup: false,
                        temperature_scaling: false,
                    })
                }
            }
            Some(d) => Ok(Toggles {
                bilateral_mixup: self.bilateral_mixup.unwrap_or(d.bilateral_mixup),
                temperature_scaling: self.temperature_scaling.unwrap_or(d.temperature_scaling),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.toggles()?;
        self.batch.validate()?;
        self.sgd.validate()?;
        self.mixup.validate()?;
        self.gamma.validate()?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn model_config(&self, input_dim: usize, num_classes: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            num_classes,
            hidden: self.hidden.clone(),
            head_hidden: self.head_hidden.clone(),
            activation: self.activation,
        }
    }

    /// Temperatures used by the loss: computed from `class_counts` when
    /// scaling is on, all ones otherwise.
    pub fn schedule(&self, class_counts: &[usize]) -> Result<TemperatureSchedule> {
        if self.toggles()?.temperature_scaling {
            temperatures(self.eta, self.epsilon, class_counts)
        } else {
            Ok(TemperatureSchedule::identity(class_counts.len()))
        }
    }
}

/// The freshly initialized model a run starts from.
pub fn build_model(config: &TrainConfig, input_dim: usize, num_classes: usize) -> Result<Model> {
    let mc = config.model_config(input_dim, num_classes);
    let mut init = rng::stream(config.seed, Stream::Init);
    Ok(if config.method.is_dual() {
        Model::Dual(DualBranchModel::new(mc, &mut init)?)
    } else {
        Model::Single(SingleBranchModel::new(mc, &mut init)?)
    })
}

/// What one optimizer step saw, handed to an observer before the update.
#[derive(Debug)]
pub struct StepTrace<'a> {
    pub epoch: usize,
    pub step: usize,
    pub uniform: &'a LabeledBatch,
    pub rebalanced: Option<&'a LabeledBatch>,
    /// Input of the conventional branch, or of the single head.
    pub conventional_input: &'a LabeledBatch,
    pub rebalancing_input: Option<&'a LabeledBatch>,
    pub temperatures: &'a [f64],
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    pub train_loss: Vec<f64>,
    /// Mean per-class accuracy on the test set after each epoch.
    pub test_accuracy: Vec<f64>,
    pub final_accuracy: GroupedAccuracy,
    pub wall_clock_secs: f64,
    pub config_echo: String,
}

impl RunRecord {
    /// Equality of everything except wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            wall_clock_secs: 0.0,
            ..self.clone()
        } == Self {
            wall_clock_secs: 0.0,
            ..other.clone()
        }
    }

    pub fn balanced_accuracy(&self) -> f64 {
        self.final_accuracy.mean_per_class()
    }

    /// `epoch,train_loss,test_accuracy` rows.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,test_accuracy")?;
        for (e, (l, a)) in self.train_loss.iter().zip(&self.test_accuracy).enumerate() {
            writeln!(w, "{e},{l},{a}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run record serializes")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub record: RunRecord,
    pub model: Model,
}

pub fn train_run(config: &TrainConfig, train: &Dataset, test: &Dataset) -> Result<TrainOutput> {
    train_run_observed(config, train, test, |_| {})
}

fn diverged(epoch: usize, step: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(_) => Error::Diverged {
            epoch,
            step,
            loss: f64::NAN,
        },
        other => other,
    }
}

/// `train_run` with `observe` called once per step, after the loss and
/// before the backward pass.
pub fn train_run_observed<F>(config: &TrainConfig, train: &Dataset, test: &Dataset, mut observe: F) -> Result<TrainOutput>
where
    F: FnMut(&StepTrace<'_>),
{
    let start = Instant::now();
    config.validate()?;
    let toggles = config.toggles()?;
    if train.is_empty() {
        return Err(Error::InvalidDataset("training set is empty".into()));
    }
    if test.is_empty() {
        return Err(Error::InvalidDataset("test set is empty".into()));
    }
    if train.num_classes() != test.num_classes() || train.dim() != test.dim() {
        return Err(Error::Dimension(format!(
            "train set has {} classes in {} dims, test set {} classes in {} dims",
            train.num_classes(),
            train.dim(),
            test.num_classes(),
            test.dim()
        )));
    }
    let counts = train.class_counts().to_vec();
    let groups = assign_groups(&counts);
    let schedule = config.schedule(&counts)?;
    let mut model = build_model(config, train.dim(), train.num_classes())?;
    if toggles.temperature_scaling {
        model.set_schedule(Some(schedule.clone()));
    }

    let seed = config.seed;
    let n = train.len();
    let needs_rebalanced = matches!(config.method, Method::SbnMix | Method::Dbn | Method::DbnMix);
    let mut uniform = UniformSampler::new(n, rng::stream(seed, Stream::UniformSampler))?;
    let mut partner = UniformSampler::new(n, rng::stream(seed, Stream::MixupPartner))?;
    let mut rebalanced = if needs_rebalanced {
        Some(RebalancedSampler::new(
            train,
            &RebalancedSamplerConfig { gamma: config.gamma },
            rng::stream(seed, Stream::RebalancedSampler),
        )?)
    } else {
        None
    };
    let mut mix_rng = rng::stream(seed, Stream::Mixup);

    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut test_accuracy = Vec::with_capacity(config.epochs);
    let sizes = config.batch.epoch_batch_sizes(n);
    let mut step = 0;
    for epoch in 0..config.epochs {
        let mut weighted = 0.0;
        let mut seen = 0;
        for &size in &sizes {
            let ub = train.batch(&uniform.draw(size))?;
            let rb = match rebalanced.as_mut() {
                Some(s) => Some(train.batch(&s.draw(size))?),
                None => None,
            };
            let mut g = Graph::new();
            let (loss_var, conv_in, reb_in) = match (&mut model, config.method) {
                (Model::Single(m), Method::Erm) => {
                    let l = record_sbn_loss(&mut g, m, &ub.features, &ub.labels, &schedule);
                    (l, ub.clone(), None)
                }
                (Model::Single(m), Method::Mixup) => {
                    let pb = train.batch(&partner.draw(size))?;
                    let mixed = mixup_classic(&ub, &pb, &config.mixup, &mut mix_rng)?;
                    let l = record_sbn_loss(&mut g, m, &mixed.features, &mixed.labels, &schedule);
                    (l, mixed, None)
                }
                (Model::Single(m), _) => {
                    let rb = rb.as_ref().expect("re-balanced batch drawn");
                    let input = if toggles.bilateral_mixup {
                        sbn_mix(&ub, rb, &config.mixup, &mut mix_rng)?
                    } else {
                        ub.clone()
                    };
                    let l = record_sbn_loss(&mut g, m, &input.features, &input.labels, &schedule);
                    (l, input, None)
                }
                (Model::Dual(m), _) => {
                    let rb = rb.as_ref().expect("re-balanced batch drawn");
                    let (c, r) = if toggles.bilateral_mixup {
                        let mix = bilateral_mix(&ub, rb, &config.mixup, &mut mix_rng)?;
                        (mix.conventional, mix.rebalancing)
                    } else {
                        (ub.clone(), rb.clone())
                    };
                    let l = record_dbn_loss(&mut g, m, &c.features, &c.labels, &r.features, &r.labels, &schedule);
                    (l, c, Some(r))
                }
            };
            let loss_var = loss_var.map_err(|e| diverged(epoch, step, e))?;
            let loss = g.value(loss_var).data()[0];
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, step, loss });
            }
            observe(&StepTrace {
                epoch,
                step,
                uniform: &ub,
                rebalanced: rb.as_ref(),
                conventional_input: &conv_in,
                rebalancing_input: reb_in.as_ref(),
                temperatures: &schedule.temperatures,
                loss,
            });
            let params = model.params_mut();
            params.zero_grad();
            g.backward(loss_var, params)?;
            sgd_step(params, &config.sgd, epoch);
            weighted += loss * size as f64;
            seen += size;
            step += 1;
        }
        train_loss.push(weighted / seen as f64);
        let acc = evaluate(&model, test, &groups, Branch::Fused).map_err(|e| diverged(epoch, step, e))?;
        test_accuracy.push(acc.mean_per_class());
    }
    let final_accuracy = evaluate(&model, test, &groups, Branch::Fused).map_err(|e| diverged(config.epochs, step, e))?;
    let record = RunRecord {
        method: config.method,
        seed,
        train_loss,
        test_accuracy,
        final_accuracy,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        config_echo: config.to_text(),
    };
    Ok(TrainOutput { record, model })
}

/// Axes of a hyperparameter grid. An empty axis keeps the base value; an
/// all-empty grid has no cells.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub eta: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<Gamma>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub eta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: Gamma,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.eta.is_empty() && self.epsilon.is_empty() && self.alpha.is_empty() && self.gamma.is_empty()
    }

    /// Cartesian product in eta, epsilon, alpha, gamma order (gamma fastest).
    pub fn cells(&self, base: &TrainConfig) -> Vec<SweepCell> {
        if self.is_empty() {
            return Vec::new();
        }
        fn or_base<T: Copy>(axis: &[T], base: T) -> Vec<T> {
            if axis.is_empty() {
                vec![base]
            } else {
                axis.to_vec()
            }
        }
        let etas = or_base(&self.eta, base.eta);
        let epsilons = or_base(&self.epsilon, base.epsilon);
        let alphas = or_base(&self.alpha, base.mixup.alpha);
        let gammas = or_base(&self.gamma, base.gamma);
        let mut cells = Vec::new();
        for &eta in &etas {
            for &epsilon in &epsilons {
                for &alpha in &alphas {
                    for &gamma in &gammas {
                        cells.push(SweepCell {
                            eta,
                            epsilon,
                            alpha,
                            gamma,
                        });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub cell: SweepCell,
    /// Re-balanced sampler class probabilities for this cell's gamma.
    pub sampler_p: Vec<f64>,
    pub outcome: std::result::Result<RunRecord, String>,
}

impl SweepCell {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        c.eta = self.eta;
        c.epsilon = self.epsilon;
        c.mixup.alpha = self.alpha;
        c.gamma = self.gamma;
        c
    }
}

/// One run per cell, all with the base seed. Cell failures are recorded in
/// their row and do not stop the sweep. `jobs` caps the worker threads.
pub fn sweep(grid: &SweepGrid, base: &TrainConfig, train: &Dataset, test: &Dataset, jobs: usize) -> Result<Vec<SweepRow>> {
    let cells = grid.cells(base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let run_cell = |cell: &SweepCell| {
        let config = cell.apply(base);
        let sampler_p =
            sampler_distribution(&RebalancedSamplerConfig { gamma: cell.gamma }, train.class_counts()).unwrap_or_default();
        let outcome = train_run(&config, train, test)
            .map(|o| o.record)
            .map_err(|e| e.to_string());
        SweepRow {
            cell: *cell,
            sampler_p,
            outcome,
        }
    };
    Ok(pool.install(|| cells.par_iter().map(run_cell).collect()))
}

/// `eta,epsilon,alpha,gamma,balanced_accuracy,many,medium,few,sampler_p,error`;
/// `sampler_p` is `;`-separated and failed cells leave the metrics empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: &mut W) -> std::io::Result<()> {
    fn cell(v: Option<f64>) -> String {
        v.map(|v| v.to_string()).unwrap_or_default()
    }
    writeln!(w, "eta,epsilon,alpha,gamma,balanced_accuracy,many,medium,few,sampler_p,error")?;
    for row in rows {
        let c = &row.cell;
        let p = row.sampler_p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        match &row.outcome {
            Ok(r) => {
                let a = &r.final_accuracy;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{p},",
                    c.eta,
                    c.epsilon,
                    c.alpha,
                    c.gamma,
                    r.balanced_accuracy(),
                    cell(a.many),
                    cell(a.medium),
                    cell(a.few)
                )?;
            }
            Err(e) => {
                let msg = e.replace([',', '\n'], " ");
                writeln!(w, "{},{},{},{},,,,,{p},{msg}", c.eta, c.epsilon, c.alpha, c.gamma)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_small_cifar_row() {
        let c = TrainConfig::default();
        assert_eq!(c.epochs, 200);
        assert_eq!(c.batch.batch_size, 128);
        assert_eq!(c.sgd.momentum, 0.9);
        assert_eq!(c.sgd.decay_epochs, vec![120, 160]);
        assert_eq!(c.gamma, Gamma::Infinite);
        assert_eq!((c.eta, c.epsilon, c.mixup.alpha), (3.0, 0.6, 1.0));
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig {
            method: Method::Dbn,
            gamma: Gamma::Finite(2.5),
            temperature_scaling: Some(true),
            hidden: vec![8],
            ..TrainConfig::default()
        };
        c.sgd.learning_rate = 0.05;
        let mut back = TrainConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn config_text_errors() {
        assert!(matches!(parse_config_text("a = 1\nnonsense\n"), Err(Error::Parse { line: 2, .. })));
        let mut c = TrainConfig::default();
        assert!(c.apply_text("# comment\n\nepochs = 3 # trailing\n").is_ok());
        assert_eq!(c.epochs, 3);
        assert!(c.set("no_such_key", "1").is_err());
        assert!(c.set("gamma", "-1").is_err());
    }

    #[test]
    fn toggles_by_method() {
        let mut c = TrainConfig {
            method: Method::Erm,
            ..TrainConfig::default()
        };
        assert!(c.toggles().is_ok());
        c.bilateral_mixup = Some(true);
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        c.method = Method::Dbn;
        assert_eq!(
            c.toggles().unwrap(),
            Toggles {
                bilateral_mixup: true,
                temperature_scaling: false
            }
        );
        c.method = Method::DbnMix;
        c.bilateral_mixup = None;
        assert_eq!(
            c.toggles().unwrap(),
            Toggles {
                bilateral_mixup: true,
                temperature_scaling: true
            }
        );
    }

    #[test]
    fn grid_cells() {
        let base = TrainConfig::default();
        assert!(SweepGrid::default().cells(&base).is_empty());
        let grid = SweepGrid {
            eta: vec![1.0, 3.0],
            gamma: vec![Gamma::Finite(1.0), Gamma::Infinite],
            ..SweepGrid::default()
        };
        let cells = grid.cells(&base);
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.epsilon == 0.6 && c.alpha == 1.0));
        assert_eq!(cells[1].gamma, Gamma::Infinite);
    }
}
