#![allow(dead_code)]

use ltmix::model::{record_dbn_loss, temperatures, Activation, DualBranchModel, ModelConfig};
use ltmix::numerics::{Graph, ParamId, Var};
use ltmix::{ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Denominator floor of the relative error; entries whose analytic and
/// numeric values are both below it are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

/// Random rows on the probability simplex (soft, mixup-like labels).
pub fn random_soft_labels(rng: &mut ChaCha8Rng, rows: usize, k: usize) -> Tensor {
    let mut data = Vec::with_capacity(rows * k);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
        let total: f64 = raw.iter().sum();
        data.extend(raw.iter().map(|v| v / total));
    }
    Tensor::new(vec![rows, k], data).unwrap()
}

/// Largest relative error between the tape gradient and central differences
/// over every scalar in `store`. `loss` records the objective on a fresh tape.
pub fn max_gradient_error<M>(
    m: &mut M,
    store: impl Fn(&mut M) -> &mut ParamStore,
    loss: impl Fn(&M, &mut Graph) -> Var,
) -> f64 {
    store(m).zero_grad();
    let mut g = Graph::new();
    let l = loss(m, &mut g);
    g.backward(l, store(m)).unwrap();
    let analytic: Vec<Vec<f64>> = {
        let s = store(m);
        let ids: Vec<ParamId> = s.ids().collect();
        ids.iter().map(|&id| s.grad(id).data().to_vec()).collect()
    };
    let eval = |m: &M| {
        let mut g = Graph::new();
        let l = loss(m, &mut g);
        g.value(l).data()[0]
    };
    let ids: Vec<ParamId> = store(m).ids().collect();
    let mut worst: f64 = 0.0;
    for (pi, &id) in ids.iter().enumerate() {
        for (j, &a) in analytic[pi].iter().enumerate() {
            let orig = store(m).value(id).data()[j];
            store(m).value_mut(id)[j] = orig + FD_STEP;
            let up = eval(m);
            store(m).value_mut(id)[j] = orig - FD_STEP;
            let down = eval(m);
            store(m).value_mut(id)[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(a, numeric));
        }
    }
    worst
}

/// Redraw every parameter, biases included, from U(-1, 1). Zero biases put
/// rows whose upstream units are all inactive exactly on a ReLU kink, where
/// central differences and the subgradient legitimately disagree.
pub fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let flat: Vec<f64> = (0..store.num_scalars()).map(|_| rng.random_range(-1.0..1.0)).collect();
    store.assign_flat(&flat).unwrap();
}

/// Parameters and inputs of a single layer check.
pub struct LayerCase {
    pub store: ParamStore,
    pub w: ParamId,
    pub b: ParamId,
    pub x: Tensor,
}

pub fn layer_case(rng: &mut ChaCha8Rng) -> LayerCase {
    let (rows, d_in, d_out) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..6));
    let mut store = ParamStore::new();
    let w = store.insert("w", random_tensor(rng, d_in, d_out, 1.0));
    let b = store.insert("b", random_tensor(rng, 1, d_out, 1.0));
    let x = random_tensor(rng, rows, d_in, 2.0);
    LayerCase { store, w, b, x }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Linear,
    Relu,
    Tanh,
    ScaledCrossEntropy,
}

pub const LAYER_KINDS: [LayerKind; 4] = [
    LayerKind::Linear,
    LayerKind::Relu,
    LayerKind::Tanh,
    LayerKind::ScaledCrossEntropy,
];

/// Worst relative gradient error of one layer kind on one random draw.
pub fn layer_draw(kind: LayerKind, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut case = layer_case(&mut rng);
    let d_out = case.store.value(case.w).cols();
    let rows = case.x.rows();
    let targets = random_soft_labels(&mut rng, rows, d_out);
    let temps: Vec<f64> = (0..d_out).map(|_| rng.random_range(0.5..3.0)).collect();
    max_gradient_error(
        &mut case,
        |c| &mut c.store,
        |c, g| {
            let x = g.input(c.x.clone());
            let w = g.param(&c.store, c.w);
            let b = g.param(&c.store, c.b);
            let z = g.linear(x, w, b).unwrap();
            match kind {
                LayerKind::Linear => g.squared_norm(z).unwrap(),
                LayerKind::Relu => {
                    let a = g.relu(z);
                    g.squared_norm(a).unwrap()
                }
                LayerKind::Tanh => {
                    let a = g.tanh(z);
                    g.squared_norm(a).unwrap()
                }
                LayerKind::ScaledCrossEntropy => g.scaled_cross_entropy(z, &targets, &temps).unwrap(),
            }
        },
    )
}

/// Worst relative gradient error of the full dual-branch objective, with
/// soft labels and class-wise temperatures, on one random network.
pub fn dbn_loss_draw(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..6);
    let d = rng.random_range(1..5);
    let config = ModelConfig {
        input_dim: d,
        num_classes: k,
        hidden: vec![rng.random_range(2..7), rng.random_range(2..7)],
        head_hidden: if rng.random_bool(0.5) { vec![rng.random_range(2..5)] } else { Vec::new() },
        activation: if rng.random_bool(0.5) { Activation::Relu } else { Activation::Tanh },
    };
    let mut model = DualBranchModel::new(config, &mut rng).unwrap();
    randomize(model.params_mut(), &mut rng);
    let rows = rng.random_range(1..7);
    let x_c = random_tensor(&mut rng, rows, d, 2.0);
    let x_r = random_tensor(&mut rng, rows, d, 2.0);
    let y_c = random_soft_labels(&mut rng, rows, k);
    let y_r = random_soft_labels(&mut rng, rows, k);
    let counts: Vec<usize> = (0..k).map(|_| rng.random_range(1..1000)).collect();
    let schedule = temperatures(rng.random_range(1.0..10.0), rng.random_range(0.05..1.0), &counts).unwrap();
    max_gradient_error(
        &mut model,
        |m| m.params_mut(),
        |m, g| record_dbn_loss(g, m, &x_c, &y_c, &x_r, &y_r, &schedule).unwrap(),
    )
}
