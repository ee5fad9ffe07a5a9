mod common;

use common::*;
use ltmix::model::{record_dbn_loss, record_sbn_loss, temperatures, ModelConfig, SingleBranchModel, TemperatureSchedule};
use ltmix::numerics::Graph;
use ltmix::rng::{self, Stream};
use ltmix::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn each_layer_matches_central_differences() {
    for kind in LAYER_KINDS {
        for seed in 0..25 {
            let err = layer_draw(kind, seed);
            assert!(err < REL_TOL, "{kind:?} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn dual_branch_loss_matches_central_differences() {
    for seed in 0..25 {
        let err = dbn_loss_draw(1000 + seed);
        assert!(err < REL_TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn single_branch_loss_matches_central_differences() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = SingleBranchModel::new(ModelConfig::three_layer(3, 4, 5), &mut rng).unwrap();
        randomize(model.params_mut(), &mut rng);
        let x = random_tensor(&mut rng, 4, 3, 1.5);
        let y = random_soft_labels(&mut rng, 4, 4);
        let schedule = temperatures(3.0, 0.6, &[400, 90, 30, 4]).unwrap();
        let err = max_gradient_error(
            &mut model,
            |m| m.params_mut(),
            |m, g| record_sbn_loss(g, m, &x, &y, &schedule).unwrap(),
        );
        assert!(err < REL_TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn backward_is_linear_in_the_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut model = ltmix::model::DualBranchModel::new(ModelConfig::mlp(3, 3), &mut rng).unwrap();
    let x_c = random_tensor(&mut rng, 5, 3, 1.0);
    let x_r = random_tensor(&mut rng, 5, 3, 1.0);
    let y_c = random_soft_labels(&mut rng, 5, 3);
    let y_r = random_soft_labels(&mut rng, 5, 3);
    let schedule = TemperatureSchedule::identity(3);

    let grads = |model: &mut ltmix::model::DualBranchModel, factor: f64| {
        model.params_mut().zero_grad();
        let mut g = Graph::new();
        let l = record_dbn_loss(&mut g, model, &x_c, &y_c, &x_r, &y_r, &schedule).unwrap();
        let scaled = g.scale(l, factor).unwrap();
        g.backward(scaled, model.params_mut()).unwrap();
        model.params().flatten_grad()
    };
    let base = grads(&mut model, 1.0);
    let tripled = grads(&mut model, -2.5);
    for (a, b) in base.iter().zip(&tripled) {
        assert!((b - -2.5 * a).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn backward_accumulates_until_zeroed() {
    let mut rng = rng::stream(3, Stream::Init);
    let mut model = SingleBranchModel::new(ModelConfig::mlp(2, 2), &mut rng).unwrap();
    let x = Tensor::from_rows(&[vec![0.5, -1.0], vec![1.5, 0.2]]).unwrap();
    let y = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
    let schedule = TemperatureSchedule::identity(2);
    let once = {
        let mut g = Graph::new();
        let l = record_sbn_loss(&mut g, &model, &x, &y, &schedule).unwrap();
        g.backward(l, model.params_mut()).unwrap();
        g.backward(l, model.params_mut()).unwrap();
        model.params().flatten_grad()
    };
    model.params_mut().zero_grad();
    let mut g = Graph::new();
    let l = record_sbn_loss(&mut g, &model, &x, &y, &schedule).unwrap();
    g.backward(l, model.params_mut()).unwrap();
    for (twice, single) in once.iter().zip(model.params().flatten_grad()) {
        assert_eq!(*twice, 2.0 * single);
    }
}

#[test]
fn non_scalar_backward_is_a_contract_error() {
    let mut rng = rng::stream(3, Stream::Init);
    let mut model = SingleBranchModel::new(ModelConfig::mlp(2, 2), &mut rng).unwrap();
    let mut g = Graph::new();
    let z = model.record(&mut g, &Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
    assert!(matches!(
        g.backward(z, model.params_mut()),
        Err(ltmix::Error::Contract(_))
    ));
}
