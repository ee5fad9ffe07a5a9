//! Dual- and single-branch networks, class-wise temperature scaling,
//! the training losses, fused inference and checkpoints.

mod checkpoint;
mod network;
mod temperature;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use network::{Activation, Branch, DualBranchModel, Inference, Model, ModelConfig, SingleBranchModel};
pub use temperature::{
    cross_entropy, dbn_loss, scaled_softmax, scaled_softmax_rows, softmax, temperatures,
    ScaledProbabilities, TemperatureSchedule,
};
pub(crate) use temperature::{cross_entropy_from_log, scaled_log_softmax_rows};

use crate::numerics::{Graph, Tensor, Var};
use crate::{Error, Result};

/// Record `0.5 * CE(softmax(z_c / T), y_c) + 0.5 * CE(softmax(z_r / T), y_r)`
/// on the tape and return the loss node.
pub fn record_dbn_loss(
    g: &mut Graph,
    model: &DualBranchModel,
    x_c: &Tensor,
    y_c: &Tensor,
    x_r: &Tensor,
    y_r: &Tensor,
    schedule: &TemperatureSchedule,
) -> Result<Var> {
    check_schedule(schedule, model.config().num_classes)?;
    let (z_c, z_r) = model.record_train(g, x_c, x_r)?;
    let l_c = g.scaled_cross_entropy(z_c, y_c, &schedule.temperatures)?;
    let l_r = g.scaled_cross_entropy(z_r, y_r, &schedule.temperatures)?;
    let h_c = g.scale(l_c, 0.5)?;
    let h_r = g.scale(l_r, 0.5)?;
    g.add(h_c, h_r)
}

/// Record the single-branch loss `CE(softmax(z / T), y)`.
pub fn record_sbn_loss(
    g: &mut Graph,
    model: &SingleBranchModel,
    x: &Tensor,
    y: &Tensor,
    schedule: &TemperatureSchedule,
) -> Result<Var> {
    check_schedule(schedule, model.config().num_classes)?;
    let z = model.record(g, x)?;
    g.scaled_cross_entropy(z, y, &schedule.temperatures)
}

/// Training-mode single-branch evaluation: temperature-scaled probabilities
/// and the cross entropy against the (possibly mixed) labels.
pub fn sbn_forward_train(
    model: &SingleBranchModel,
    x: &Tensor,
    y: &Tensor,
    schedule: &TemperatureSchedule,
) -> Result<(ScaledProbabilities, f64)> {
    check_schedule(schedule, model.config().num_classes)?;
    let z = model.logits(x)?;
    let p = scaled_softmax(&z, schedule)?;
    let loss = cross_entropy(p.tensor(), y)?;
    Ok((p, loss))
}

fn check_schedule(schedule: &TemperatureSchedule, num_classes: usize) -> Result<()> {
    if schedule.num_classes() != num_classes {
        return Err(Error::Dimension(format!(
            "schedule covers {} classes, model has {num_classes}",
            schedule.num_classes()
        )));
    }
    Ok(())
}
