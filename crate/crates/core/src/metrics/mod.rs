//! Salient-object-detection metrics.
//!
//! Threshold-based scores (PR curve, max/mean F-measure, E-measure) work on
//! the 8-bit quantised prediction `round(v·255)`; MAE, S-measure and the
//! weighted F-measure use the real-valued prediction.

mod alignment;
mod pr;
pub mod reference;
mod report;
mod structure;
mod weighted_f;

pub use alignment::{e_measure, e_measure_from_counts, e_measure_with_mode};
pub use pr::{
    adaptive_counts, adaptive_threshold, f_beta, f_max, f_mean, pr_curve, threshold_counts,
    Counts, PrCurve, THRESHOLDS,
};
pub use report::{evaluate_dataset, evaluate_dataset_with, evaluate_pair, EvalPair, ImageRecord, MetricReport, MetricSummary};
pub use structure::{s_measure, s_measure_components, s_object, s_region};
pub use weighted_f::{f_weighted, nearest_foreground, WEIGHTED_F_BETA_SQ};

use serde::{Deserialize, Serialize};

use crate::tensor::{Tensor, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("prediction {pred:?} and ground truth {gt:?} differ in shape")]
    Shape { pred: Vec<usize>, gt: Vec<usize> },
    #[error("ground truth has no foreground pixels")]
    EmptyGroundTruth,
    #[error("{0} must be a (1, H, W) map")]
    NotAMap(&'static str),
    #[error("{0} values must lie in [0, 1]")]
    OutOfRange(&'static str),
    #[error("ground truth values must be exactly 0 or 1")]
    NotBinary,
    #[error("nothing to evaluate: {0}")]
    NoPairs(String),
    #[error("invalid evaluation config: {0}")]
    Config(String),
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

fn check_map(t: &Tensor, what: &'static str) -> Result<()> {
    match *t.shape() {
        [1, _, _] => Ok(()),
        _ => Err(MetricError::NotAMap(what)),
    }
}

/// Quantise a value in `[0, 1]` to an 8-bit level, rounding halves up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Real-valued prediction `(1, H, W)` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap(Tensor);

impl SaliencyMap {
    pub fn new(values: Tensor) -> Result<Self> {
        check_map(&values, "saliency map")?;
        if values.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(MetricError::OutOfRange("saliency"));
        }
        Ok(Self(values))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn height_width(&self) -> (usize, usize) {
        (self.0.shape()[1], self.0.shape()[2])
    }

    /// 8-bit levels `round(v·255)`, row-major.
    pub fn levels(&self) -> Vec<u8> {
        self.0.data().iter().map(|&v| quantize(v)).collect()
    }

    /// Resample to `h × w`; bilinear weights keep values inside `[0, 1]`.
    pub fn resized(&self, h: usize, w: usize) -> Result<Self> {
        let t = crate::tensor::bilinear_resize(&self.0, h, w)?;
        Ok(Self(t.map(|v| v.clamp(0.0, 1.0))))
    }
}

/// Binary ground-truth mask `(1, H, W)` with values in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMask(Tensor);

/// 8-bit level at or above which a ground-truth pixel is foreground.
pub const GT_THRESHOLD_LEVEL: u8 = 128;

impl GroundTruthMask {
    pub fn new(values: Tensor) -> Result<Self> {
        check_map(&values, "ground truth")?;
        if values.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(MetricError::NotBinary);
        }
        Ok(Self(values))
    }

    /// Binarises a grey map in `[0, 1]` at 8-bit level 128.
    pub fn from_gray(values: &Tensor) -> Result<Self> {
        check_map(values, "ground truth")?;
        Self::new(values.map(|v| if quantize(v) >= GT_THRESHOLD_LEVEL { 1.0 } else { 0.0 }))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn height_width(&self) -> (usize, usize) {
        (self.0.shape()[1], self.0.shape()[2])
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.data().iter().map(|&v| v == 1.0)
    }

    pub fn foreground_count(&self) -> usize {
        self.bits().filter(|&b| b).count()
    }
}

pub(crate) fn ensure_same_shape(pred: &SaliencyMap, gt: &GroundTruthMask) -> Result<()> {
    if pred.tensor().shape() != gt.tensor().shape() {
        return Err(MetricError::Shape {
            pred: pred.tensor().shape().to_vec(),
            gt: gt.tensor().shape().to_vec(),
        });
    }
    Ok(())
}

/// Mean absolute error between prediction and ground truth.
pub fn mae(pred: &SaliencyMap, gt: &GroundTruthMask) -> Result<f64> {
    ensure_same_shape(pred, gt)?;
    let p = pred.tensor().data();
    let g = gt.tensor().data();
    Ok(p.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptiveRule {
    /// `min(2·mean, 255)` of the quantised prediction.
    #[default]
    TwiceMean,
    /// Mean of the quantised prediction.
    Mean,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyGtPolicy {
    /// Leave the image out of the dataset report and list it as skipped.
    #[default]
    Skip,
    /// Keep the image; PR-based and weighted F-measures score zero, MAE,
    /// S-measure and E-measure use their own empty-mask rules.
    ScoreZero,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EMeasureMode {
    /// Binarise at the adaptive threshold.
    #[default]
    Adaptive,
    /// Best score over the 256 strict thresholds.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub beta_sq: f64,
    pub alpha: f64,
    pub threshold_count: usize,
    pub adaptive_rule: AdaptiveRule,
    pub wf_gauss_size: usize,
    pub wf_gauss_sigma: f64,
    pub empty_gt_policy: EmptyGtPolicy,
    pub e_measure_mode: EMeasureMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            beta_sq: 0.3,
            alpha: 0.5,
            threshold_count: THRESHOLDS,
            adaptive_rule: AdaptiveRule::TwiceMean,
            wf_gauss_size: 7,
            wf_gauss_sigma: 5.0,
            empty_gt_policy: EmptyGtPolicy::Skip,
            e_measure_mode: EMeasureMode::Adaptive,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MetricError::Config(m));
        if !(self.beta_sq > 0.0 && self.beta_sq.is_finite()) {
            return bad(format!("beta_sq must be positive, got {}", self.beta_sq));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if self.threshold_count != THRESHOLDS {
            return bad(format!("threshold_count must be {THRESHOLDS}"));
        }
        if self.wf_gauss_size.is_multiple_of(2) {
            return bad("wf_gauss_size must be odd".into());
        }
        if !(self.wf_gauss_sigma > 0.0 && self.wf_gauss_sigma.is_finite()) {
            return bad("wf_gauss_sigma must be positive".into());
        }
        Ok(())
    }
}
