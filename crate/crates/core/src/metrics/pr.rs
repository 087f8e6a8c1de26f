use serde::{Deserialize, Serialize};

use super::{ensure_same_shape, AdaptiveRule, EvalConfig, GroundTruthMask, MetricError, Result, SaliencyMap};

/// Number of binarisation thresholds, `t = 0..=255`. A pixel is predicted
/// foreground at threshold `t` when its level is strictly greater than `t`.
pub const THRESHOLDS: usize = 256;

/// Confusion counts of one binarisation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `TP / (TP + FP)`, zero when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        let predicted = self.tp + self.fp;
        if predicted == 0 { 0.0 } else { self.tp as f64 / predicted as f64 }
    }

    /// `TP / (TP + FN)`, zero when the mask is empty.
    pub fn recall(&self) -> f64 {
        let actual = self.tp + self.fn_;
        if actual == 0 { 0.0 } else { self.tp as f64 / actual as f64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl PrCurve {
    pub fn zeros() -> Self {
        Self {
            precision: vec![0.0; THRESHOLDS],
            recall: vec![0.0; THRESHOLDS],
        }
    }

    pub fn from_counts(counts: &[Counts]) -> Self {
        Self {
            precision: counts.iter().map(Counts::precision).collect(),
            recall: counts.iter().map(Counts::recall).collect(),
        }
    }

    pub fn f_measures(&self, beta_sq: f64) -> Vec<f64> {
        self.precision
            .iter()
            .zip(&self.recall)
            .map(|(&p, &r)| f_beta(p, r, beta_sq))
            .collect()
    }

    /// Per-threshold arithmetic mean of several curves, accumulated in order.
    pub fn mean_of<'a>(curves: impl IntoIterator<Item = &'a PrCurve>) -> Option<Self> {
        let mut acc = Self::zeros();
        let mut n = 0usize;
        for c in curves {
            for t in 0..THRESHOLDS {
                acc.precision[t] += c.precision[t];
                acc.recall[t] += c.recall[t];
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        acc.precision.iter_mut().chain(acc.recall.iter_mut()).for_each(|v| *v /= n as f64);
        Some(acc)
    }
}

/// Level histograms of foreground and background pixels.
fn histograms(pred: &SaliencyMap, gt: &GroundTruthMask) -> ([u64; THRESHOLDS], [u64; THRESHOLDS]) {
    let mut fg = [0u64; THRESHOLDS];
    let mut bg = [0u64; THRESHOLDS];
    for (level, is_fg) in pred.levels().into_iter().zip(gt.bits()) {
        if is_fg {
            fg[level as usize] += 1;
        } else {
            bg[level as usize] += 1;
        }
    }
    (fg, bg)
}

/// Confusion counts at every threshold `t = 0..=255` (foreground iff level > t),
/// built from suffix sums of the level histograms.
pub fn threshold_counts(pred: &SaliencyMap, gt: &GroundTruthMask) -> Result<Vec<Counts>> {
    ensure_same_shape(pred, gt)?;
    let (fg, bg) = histograms(pred, gt);
    let (pos, neg): (u64, u64) = (fg.iter().sum(), bg.iter().sum());
    let mut counts = vec![Counts::default(); THRESHOLDS];
    let (mut tp, mut fp) = (0u64, 0u64);
    for t in (0..THRESHOLDS).rev() {
        counts[t] = Counts {
            tp,
            fp,
            fn_: pos - tp,
            tn: neg - fp,
        };
        tp += fg[t];
        fp += bg[t];
    }
    Ok(counts)
}

pub fn pr_curve(pred: &SaliencyMap, gt: &GroundTruthMask) -> Result<PrCurve> {
    let counts = threshold_counts(pred, gt)?;
    if counts[0].tp + counts[0].fn_ == 0 {
        return Err(MetricError::EmptyGroundTruth);
    }
    Ok(PrCurve::from_counts(&counts))
}

/// `(1 + β²)·p·r / (β²·p + r)`, zero when the denominator vanishes.
pub fn f_beta(precision: f64, recall: f64, beta_sq: f64) -> f64 {
    let den = beta_sq * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + beta_sq) * precision * recall / den
    }
}

/// Largest F-measure along a PR curve.
pub fn f_max(curve: &PrCurve, cfg: &EvalConfig) -> f64 {
    curve.f_measures(cfg.beta_sq).into_iter().fold(0.0, f64::max)
}

/// Adaptive binarisation level for a prediction, on the 0..=255 scale.
pub fn adaptive_threshold(pred: &SaliencyMap, rule: AdaptiveRule) -> f64 {
    let levels = pred.levels();
    let mean = levels.iter().map(|&l| l as u64).sum::<u64>() as f64 / levels.len() as f64;
    match rule {
        AdaptiveRule::TwiceMean => (2.0 * mean).min(255.0),
        AdaptiveRule::Mean => mean,
    }
}

/// Confusion counts of the adaptive binarisation: a pixel is foreground when
/// its level is non-zero and at least the adaptive threshold.
pub fn adaptive_counts(pred: &SaliencyMap, gt: &GroundTruthMask, rule: AdaptiveRule) -> Result<Counts> {
    ensure_same_shape(pred, gt)?;
    let threshold = adaptive_threshold(pred, rule);
    let first = (threshold.ceil() as usize).max(1);
    let (fg, bg) = histograms(pred, gt);
    let tp: u64 = fg[first.min(THRESHOLDS)..].iter().sum();
    let fp: u64 = bg[first.min(THRESHOLDS)..].iter().sum();
    Ok(Counts {
        tp,
        fp,
        fn_: fg.iter().sum::<u64>() - tp,
        tn: bg.iter().sum::<u64>() - fp,
    })
}

/// F-measure at the adaptive threshold.
pub fn f_mean(pred: &SaliencyMap, gt: &GroundTruthMask, cfg: &EvalConfig) -> Result<f64> {
    let c = adaptive_counts(pred, gt, cfg.adaptive_rule)?;
    if c.tp + c.fn_ == 0 {
        return Err(MetricError::EmptyGroundTruth);
    }
    Ok(f_beta(c.precision(), c.recall(), cfg.beta_sq))
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::metrics::reference;
    use proptest::prelude::*;

    #[test]
    fn perfect_binary_prediction() {
        let bits = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let curve = pr_curve(&pred(2, 3, &bits), &gt(2, 3, &bits)).unwrap();
        for t in 0..255 {
            assert_eq!((curve.precision[t], curve.recall[t]), (1.0, 1.0));
        }
        // nothing exceeds level 255
        assert_eq!((curve.precision[255], curve.recall[255]), (0.0, 0.0));
        assert_eq!(f_max(&curve, &EvalConfig::default()), 1.0);
    }

    #[test]
    fn half_grey_prediction() {
        // level round(127.5) = 128
        let curve = pr_curve(&pred(2, 2, &[0.5; 4]), &gt(2, 2, &[1.0, 0.0, 1.0, 0.0])).unwrap();
        for t in 0..THRESHOLDS {
            if t <= 127 {
                assert_eq!((curve.precision[t], curve.recall[t]), (0.5, 1.0));
            } else {
                assert_eq!((curve.precision[t], curve.recall[t]), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn counts_match_brute_force() {
        for seed in 0..200 {
            let (p, g) = random_pair(seed, 16, 16);
            let fast = threshold_counts(&p, &g).unwrap();
            let slow = reference::threshold_counts(&p, &g);
            assert_eq!(fast, slow);
            if g.foreground_count() == 0 {
                continue;
            }
            let curve = pr_curve(&p, &g).unwrap();
            for (t, c) in slow.iter().enumerate() {
                let prec = if c.tp + c.fp == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
                let rec = c.tp as f64 / (c.tp + c.fn_) as f64;
                assert!((curve.precision[t] - prec).abs() <= 1e-12);
                assert!((curve.recall[t] - rec).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn f_beta_values() {
        assert_eq!(f_beta(1.0, 1.0, 0.3), 1.0);
        for v in [0.1, 0.37, 0.9] {
            for b in [0.3, 1.0, 2.5] {
                assert!((f_beta(v, v, b) - v).abs() < 1e-15);
            }
        }
        assert!((f_beta(0.5, 1.0, 0.3) - 1.3 * 0.5 / 1.15).abs() < 1e-15);
        assert!((f_beta(0.5, 1.0, 0.3) - 0.5652173913043478).abs() < 1e-15);
        assert_eq!(f_beta(0.0, 0.0, 0.3), 0.0);
    }

    #[test]
    fn f_max_scan() {
        assert_eq!(f_max(&PrCurve::zeros(), &EvalConfig::default()), 0.0);
        let (p, g) = random_pair(9, 8, 8);
        let curve = pr_curve(&p, &g).unwrap();
        let mut best = 0.0;
        for t in 0..THRESHOLDS {
            let (pr, rc) = (curve.precision[t], curve.recall[t]);
            let f = if 0.3 * pr + rc > 0.0 { 1.3 * pr * rc / (0.3 * pr + rc) } else { 0.0 };
            if f > best {
                best = f;
            }
        }
        assert_eq!(f_max(&curve, &EvalConfig::default()), best);
    }

    #[test]
    fn f_mean_cases() {
        let cfg = EvalConfig::default();
        let bits = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(f_mean(&pred(3, 3, &bits), &gt(3, 3, &bits), &cfg).unwrap(), 1.0);
        for c in [0.0, 0.2, 0.5, 0.8] {
            assert_eq!(f_mean(&pred(2, 2, &[c; 4]), &gt(2, 2, &[1.0; 4]), &cfg).unwrap(), 0.0, "c = {c}");
        }
        assert!(matches!(f_mean(&pred(2, 2, &[0.3; 4]), &gt(2, 2, &[0.0; 4]), &cfg), Err(MetricError::EmptyGroundTruth)));
    }

    #[test]
    fn f_mean_matches_direct_recount() {
        let cfg = EvalConfig::default();
        for seed in 0..20 {
            let (p, g) = random_pair(100 + seed, 8, 8);
            let levels: Vec<f64> = p.tensor().data().iter().map(|v| (v * 255.0 + 0.5).floor()).collect();
            let thr = (2.0 * levels.iter().sum::<f64>() / 64.0).min(255.0);
            let (mut tp, mut fp, mut pos) = (0.0, 0.0, 0.0);
            for (l, &gv) in levels.iter().zip(g.tensor().data()) {
                let on = *l >= thr && *l > 0.0;
                if gv == 1.0 {
                    pos += 1.0;
                }
                match (on, gv == 1.0) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    _ => {}
                }
            }
            let (prec, rec) = (if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 }, tp / pos);
            let expected = if prec + rec > 0.0 { 1.3 * prec * rec / (0.3 * prec + rec) } else { 0.0 };
            assert!((f_mean(&p, &g, &cfg).unwrap() - expected).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn f_max_dominates_f_mean(seed in any::<u64>()) {
            let cfg = EvalConfig::default();
            let (p, g) = random_pair(seed, 9, 7);
            prop_assume!(g.foreground_count() > 0);
            let curve = pr_curve(&p, &g).unwrap();
            prop_assert!(f_max(&curve, &cfg) >= f_mean(&p, &g, &cfg).unwrap());
        }

        #[test]
        fn threshold_zero_recalls_everything(seed in any::<u64>()) {
            let (p, g) = random_pair(seed, 6, 6);
            prop_assume!(g.foreground_count() > 0);
            let positive = SaliencyMap::new(p.tensor().map(|v| v.max(1.0 / 255.0))).unwrap();
            prop_assert_eq!(pr_curve(&positive, &g).unwrap().recall[0], 1.0);
        }
    }
}
