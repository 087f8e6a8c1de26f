use super::{shape_err, KernelError, Result};
use crate::metrics::{GroundTruthMask, SaliencyMap};

/// Predictions are clamped to `[BCE_CLAMP, 1 − BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

pub const POLY_POWER: f64 = 0.9;

/// Mean binary cross-entropy `−[g·ln p + (1 − g)·ln(1 − p)]` over all pixels.
pub fn bce_loss(pred: &SaliencyMap, gt: &GroundTruthMask) -> Result<f64> {
    let (p, g) = (pred.tensor(), gt.tensor());
    if p.shape() != g.shape() {
        return Err(shape_err("bce_loss", format!("{:?} vs {:?}", p.shape(), g.shape())));
    }
    let total: f64 = p
        .data()
        .iter()
        .zip(g.data())
        .map(|(&p, &g)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / p.len() as f64)
}

/// Poly learning-rate decay `base·(1 − iter/max_iter)^power`.
pub fn poly_lr(base_lr: f64, iter: u64, max_iter: u64, power: f64) -> Result<f64> {
    if max_iter == 0 || iter > max_iter {
        return Err(KernelError::Config(format!(
            "poly_lr needs 0 <= iter <= max_iter and max_iter >= 1, got {iter}/{max_iter}"
        )));
    }
    Ok(base_lr * (1.0 - iter as f64 / max_iter as f64).powf(power))
}
