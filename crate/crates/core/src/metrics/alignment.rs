use super::pr::{adaptive_counts, threshold_counts, Counts};
use super::{EMeasureMode, EvalConfig, GroundTruthMask, Result, SaliencyMap};

/// Enhanced-alignment score of a binary prediction, computed from its
/// confusion counts.
///
/// With `φ = map − mean(map)` for both binary maps, the per-pixel alignment is
/// `ξ = 2·φ_g·φ_p / (φ_g² + φ_p² + ε)` and the score is `mean((1 + ξ)² / 4)`.
/// Because both maps are binary, `ξ` only takes four values, one per cell of
/// the confusion table. An all-background mask scores the fraction of pixels
/// predicted background; an all-foreground mask the fraction predicted
/// foreground.
pub fn e_measure_from_counts(c: &Counts) -> f64 {
    let n = c.total() as f64;
    let predicted = (c.tp + c.fp) as f64;
    let actual = c.tp + c.fn_;
    if actual == 0 {
        return (n - predicted) / n;
    }
    if c.fp + c.tn == 0 {
        return predicted / n;
    }
    let mu_p = predicted / n;
    let mu_g = actual as f64 / n;
    let enhanced = |p: f64, g: f64| {
        let (ap, ag) = (p - mu_p, g - mu_g);
        let xi = 2.0 * ag * ap / (ag * ag + ap * ap + f64::EPSILON);
        (xi + 1.0) * (xi + 1.0) / 4.0
    };
    (c.tp as f64 * enhanced(1.0, 1.0)
        + c.fp as f64 * enhanced(1.0, 0.0)
        + c.fn_ as f64 * enhanced(0.0, 1.0)
        + c.tn as f64 * enhanced(0.0, 0.0))
        / n
}

/// E-measure at the adaptive binarisation.
pub fn e_measure(pred: &SaliencyMap, gt: &GroundTruthMask, cfg: &EvalConfig) -> Result<f64> {
    Ok(e_measure_from_counts(&adaptive_counts(pred, gt, cfg.adaptive_rule)?))
}

/// E-measure under the configured binarisation mode.
pub fn e_measure_with_mode(pred: &SaliencyMap, gt: &GroundTruthMask, cfg: &EvalConfig) -> Result<f64> {
    match cfg.e_measure_mode {
        EMeasureMode::Adaptive => e_measure(pred, gt, cfg),
        EMeasureMode::Max => Ok(threshold_counts(pred, gt)?
            .iter()
            .map(e_measure_from_counts)
            .fold(0.0, f64::max)),
    }
}
