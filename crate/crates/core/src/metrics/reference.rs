//! Direct per-pixel transcriptions of the metrics.
//!
//! These are slow and written for readability. They serve as cross-checks
//! for the optimised implementations.

use super::pr::{Counts, THRESHOLDS};
use super::{adaptive_threshold, AdaptiveRule, GroundTruthMask, SaliencyMap};

const EPS: f64 = f64::EPSILON;

fn levels_and_bits(pred: &SaliencyMap, gt: &GroundTruthMask) -> (Vec<u8>, Vec<bool>) {
    assert_eq!(pred.tensor().shape(), gt.tensor().shape(), "shape mismatch");
    (pred.levels(), gt.bits().collect())
}

fn count(on: impl Iterator<Item = bool>, bits: &[bool]) -> Counts {
    let mut c = Counts::default();
    for (p, &g) in on.zip(bits) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

/// Confusion counts at each threshold by rescanning every pixel.
pub fn threshold_counts(pred: &SaliencyMap, gt: &GroundTruthMask) -> Vec<Counts> {
    let (levels, bits) = levels_and_bits(pred, gt);
    (0..THRESHOLDS)
        .map(|t| count(levels.iter().map(|&l| l as usize > t), &bits))
        .collect()
}

pub fn mae(pred: &SaliencyMap, gt: &GroundTruthMask) -> f64 {
    let p = pred.tensor().data();
    let g = gt.tensor().data();
    let mut acc = 0.0;
    for i in 0..p.len() {
        acc += (p[i] - g[i]).abs();
    }
    acc / p.len() as f64
}

/// E-measure from the per-pixel alignment matrix at the adaptive binarisation.
pub fn e_measure(pred: &SaliencyMap, gt: &GroundTruthMask, rule: AdaptiveRule) -> f64 {
    let (levels, bits) = levels_and_bits(pred, gt);
    let thr = adaptive_threshold(pred, rule);
    let fm: Vec<f64> = levels
        .iter()
        .map(|&l| if l as f64 >= thr && l > 0 { 1.0 } else { 0.0 })
        .collect();
    let g: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let n = g.len() as f64;
    let gsum: f64 = g.iter().sum();
    let enhanced: Vec<f64> = if gsum == 0.0 {
        fm.iter().map(|v| 1.0 - v).collect()
    } else if gsum == n {
        fm.clone()
    } else {
        let mu_fm = fm.iter().sum::<f64>() / n;
        let mu_g = gsum / n;
        fm.iter()
            .zip(&g)
            .map(|(f, gv)| {
                let af = f - mu_fm;
                let ag = gv - mu_g;
                let align = 2.0 * ag * af / (ag * ag + af * af + EPS);
                (align + 1.0).powi(2) / 4.0
            })
            .collect()
    };
    enhanced.iter().sum::<f64>() / n
}

/// Nearest foreground pixel by exhaustive search in row-major order, keeping
/// the first one found at the minimum distance.
pub fn nearest_foreground(gt: &GroundTruthMask) -> Option<(Vec<u64>, Vec<usize>)> {
    let (h, w) = gt.height_width();
    let bits: Vec<bool> = gt.bits().collect();
    let fg: Vec<usize> = (0..h * w).filter(|&i| bits[i]).collect();
    if fg.is_empty() {
        return None;
    }
    let mut dist = Vec::with_capacity(h * w);
    let mut index = Vec::with_capacity(h * w);
    for i in 0..h * w {
        let (y, x) = ((i / w) as i64, (i % w) as i64);
        let mut best = (u64::MAX, 0usize);
        for &j in &fg {
            let (fy, fx) = ((j / w) as i64, (j % w) as i64);
            let d = ((fy - y).pow(2) + (fx - x).pow(2)) as u64;
            if d < best.0 {
                best = (d, j);
            }
        }
        dist.push(best.0);
        index.push(best.1);
    }
    Some((dist, index))
}

/// Weighted F-measure with a full 2-D Gaussian window and exhaustive
/// nearest-foreground search. Panics on an empty mask.
pub fn f_weighted(pred: &SaliencyMap, gt: &GroundTruthMask, size: usize, sigma: f64) -> f64 {
    let (h, w) = gt.height_width();
    let (dist, idx) = nearest_foreground(gt).expect("mask has foreground");
    let p = pred.tensor().data();
    let g = gt.tensor().data();
    let e: Vec<f64> = (0..h * w).map(|i| (p[i] - g[i]).abs()).collect();
    let mut et = e.clone();
    for i in 0..h * w {
        if g[i] == 0.0 {
            et[i] = e[idx[i]];
        }
    }

    let r = (size / 2) as i64;
    let mut kernel = vec![0.0; size * size];
    for ky in 0..size {
        for kx in 0..size {
            let (dy, dx) = (ky as i64 - r, kx as i64 - r);
            kernel[ky * size + kx] = (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
        }
    }
    let ksum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= ksum);

    let mut ea = vec![0.0; h * w];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for ky in 0..size as i64 {
                for kx in 0..size as i64 {
                    let (yy, xx) = (y + ky - r, x + kx - r);
                    if yy >= 0 && yy < h as i64 && xx >= 0 && xx < w as i64 {
                        acc += kernel[(ky * size as i64 + kx) as usize] * et[(yy * w as i64 + xx) as usize];
                    }
                }
            }
            ea[(y * w as i64 + x) as usize] = acc;
        }
    }

    let mut min_e_ea = e.clone();
    for i in 0..h * w {
        if g[i] == 1.0 && ea[i] < e[i] {
            min_e_ea[i] = ea[i];
        }
    }
    let mut b = vec![1.0; h * w];
    for i in 0..h * w {
        if g[i] == 0.0 {
            b[i] = 2.0 - ((0.5f64).ln() / 5.0 * (dist[i] as f64).sqrt()).exp();
        }
    }
    let ew: Vec<f64> = (0..h * w).map(|i| min_e_ea[i] * b[i]).collect();

    let gt_sum: f64 = g.iter().sum();
    let ew_fg: f64 = (0..h * w).filter(|&i| g[i] == 1.0).map(|i| ew[i]).sum();
    let ew_bg: f64 = (0..h * w).filter(|&i| g[i] == 0.0).map(|i| ew[i]).sum();
    let tpw = gt_sum - ew_fg;
    let fpw = ew_bg;
    let recall = 1.0 - ew_fg / gt_sum;
    let precision = tpw / (EPS + tpw + fpw);
    2.0 * recall * precision / (EPS + recall + precision)
}

struct Block {
    pred: Vec<f64>,
    gt: Vec<f64>,
}

fn ssim(block: &Block) -> f64 {
    let n = block.pred.len() as f64;
    let x = block.pred.iter().sum::<f64>() / n;
    let y = block.gt.iter().sum::<f64>() / n;
    let mut sigma_x2 = 0.0;
    let mut sigma_y2 = 0.0;
    let mut sigma_xy = 0.0;
    for (p, g) in block.pred.iter().zip(&block.gt) {
        sigma_x2 += (p - x) * (p - x);
        sigma_y2 += (g - y) * (g - y);
        sigma_xy += (p - x) * (g - y);
    }
    sigma_x2 /= n - 1.0 + EPS;
    sigma_y2 /= n - 1.0 + EPS;
    sigma_xy /= n - 1.0 + EPS;
    let alpha = 4.0 * x * y * sigma_xy;
    let beta = (x * x + y * y) * (sigma_x2 + sigma_y2);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if alpha == 0.0 && beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn object(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let x = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - x) * (v - x)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    2.0 * x / (x * x + 1.0 + var.sqrt() + EPS)
}

/// Structure measure, following the usual block-splitting construction.
pub fn s_measure(pred: &SaliencyMap, gt: &GroundTruthMask, alpha: f64) -> f64 {
    let (h, w) = gt.height_width();
    let p = pred.tensor().data();
    let g = gt.tensor().data();
    let y_mean = g.iter().sum::<f64>() / g.len() as f64;
    if y_mean == 0.0 {
        return 1.0 - p.iter().sum::<f64>() / p.len() as f64;
    }
    if y_mean == 1.0 {
        return p.iter().sum::<f64>() / p.len() as f64;
    }

    let fg: Vec<f64> = (0..h * w).filter(|&i| g[i] == 1.0).map(|i| p[i]).collect();
    let bg: Vec<f64> = (0..h * w).filter(|&i| g[i] == 0.0).map(|i| 1.0 - p[i]).collect();
    let so = y_mean * object(&fg) + (1.0 - y_mean) * object(&bg);

    let (mut total, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            if g[r * w + c] == 1.0 {
                total += 1.0;
                sx += (c + 1) as f64;
                sy += (r + 1) as f64;
            }
        }
    }
    let cx = (sx / total).round() as usize;
    let cy = (sy / total).round() as usize;

    let cut = |r0: usize, r1: usize, c0: usize, c1: usize| {
        let mut b = Block { pred: Vec::new(), gt: Vec::new() };
        for r in r0..r1 {
            for c in c0..c1 {
                b.pred.push(p[r * w + c]);
                b.gt.push(g[r * w + c]);
            }
        }
        b
    };
    let area = (h * w) as f64;
    let mut sr = 0.0;
    for block in [cut(0, cy, 0, cx), cut(0, cy, cx, w), cut(cy, h, 0, cx), cut(cy, h, cx, w)] {
        if block.pred.is_empty() {
            continue;
        }
        sr += block.pred.len() as f64 / area * ssim(&block);
    }
    let q = alpha * so + (1.0 - alpha) * sr;
    if q < 0.0 { 0.0 } else { q }
}
