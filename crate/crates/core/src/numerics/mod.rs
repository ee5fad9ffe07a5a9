//! Dense tensors, reverse-mode differentiation and the SGD optimizer.

mod autodiff;
mod optim;
mod tensor;

pub use autodiff::{Graph, Var};
pub use optim::{sgd_step, ParamId, ParamStore, SgdConfig};
pub use tensor::{forward_linear, Tensor};

use rand::Rng;

/// Kaiming-style uniform initialization: entries drawn from
/// `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))` for a `fan_in x fan_out` weight.
pub fn kaiming_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / fan_in as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("positive layer dims")
}
