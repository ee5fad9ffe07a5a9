//! Long-tailed classification toolkit.
//!
//! Re-balanced sampling, bilateral mixup, class-wise temperature scaling and
//! dual-branch training for small feed-forward networks, together with
//! synthetic long-tailed datasets and evaluation by class-size group.

pub mod augment;
pub mod datasets;
mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod sampling;
pub mod studies;
pub mod train;

pub use error::{Error, Result};
pub use numerics::{ParamStore, SgdConfig, Tensor};
