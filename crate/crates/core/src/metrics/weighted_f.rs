use super::{ensure_same_shape, EvalConfig, GroundTruthMask, MetricError, Result, SaliencyMap};

/// β² of the weighted F-measure.
pub const WEIGHTED_F_BETA_SQ: f64 = 1.0;

const EPS: f64 = f64::EPSILON;

/// Squared Euclidean distance from every pixel to its nearest foreground
/// pixel, and that pixel's row-major index. Ties go to the smallest
/// `(row, column)`. Returns `None` for an empty mask.
pub fn nearest_foreground(gt: &GroundTruthMask) -> Option<(Vec<u64>, Vec<usize>)> {
    let (h, w) = gt.height_width();
    let g = gt.tensor().data();
    // nearest foreground row in each column, per row
    let mut col_row: Vec<Option<usize>> = vec![None; h * w];
    for x in 0..w {
        let mut above: Option<usize> = None;
        for y in 0..h {
            if g[y * w + x] == 1.0 {
                above = Some(y);
            }
            col_row[y * w + x] = above;
        }
        let mut below: Option<usize> = None;
        for y in (0..h).rev() {
            if g[y * w + x] == 1.0 {
                below = Some(y);
            }
            let pick = match (col_row[y * w + x], below) {
                (Some(a), Some(b)) => Some(if b - y < y - a { b } else { a }),
                (a, b) => a.or(b),
            };
            col_row[y * w + x] = pick;
        }
    }
    if col_row.iter().all(Option::is_none) {
        return None;
    }

    let mut dist = vec![0u64; h * w];
    let mut index = vec![0usize; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut best: Option<(u64, usize, usize)> = None;
            let consider = |best: &mut Option<(u64, usize, usize)>, c: usize| {
                if let Some(r) = col_row[y * w + c] {
                    let (dy, dx) = (r.abs_diff(y) as u64, c.abs_diff(x) as u64);
                    let cand = (dy * dy + dx * dx, r, c);
                    if best.is_none_or(|b| cand < b) {
                        *best = Some(cand);
                    }
                }
            };
            for k in 0..w {
                if best.is_some_and(|(d, _, _)| (k as u64) * (k as u64) > d) {
                    break;
                }
                if k <= x {
                    consider(&mut best, x - k);
                }
                if k > 0 && x + k < w {
                    consider(&mut best, x + k);
                }
            }
            let (d, r, c) = best.expect("mask has foreground");
            dist[y * w + x] = d;
            index[y * w + x] = r * w + c;
        }
    }
    Some((dist, index))
}

/// Normalised 1-D Gaussian taps; their outer product is the normalised 2-D kernel.
fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Same-size Gaussian filter with zero padding, one axis at a time.
fn gaussian_filter(src: &[f64], h: usize, w: usize, size: usize, sigma: f64) -> Vec<f64> {
    let taps = gaussian_taps(size, sigma);
    let r = size / 2;
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = x as isize + k as isize - r as isize;
                if (0..w as isize).contains(&xx) {
                    acc += t * src[y * w + xx as usize];
                }
            }
            rows[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let yy = y as isize + k as isize - r as isize;
                if (0..h as isize).contains(&yy) {
                    acc += t * rows[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Weighted F-measure.
///
/// Background errors are replaced by the error at the nearest foreground
/// pixel and smoothed with a Gaussian; foreground errors take the smaller of
/// raw and smoothed error; background errors are scaled by
/// `2 − exp(ln(0.5)/5 · distance)`. The weighted precision and recall are
/// combined with β² = 1.
pub fn f_weighted(pred: &SaliencyMap, gt: &GroundTruthMask, cfg: &EvalConfig) -> Result<f64> {
    ensure_same_shape(pred, gt)?;
    let (h, w) = gt.height_width();
    let (dist, nearest) = nearest_foreground(gt).ok_or(MetricError::EmptyGroundTruth)?;
    let p = pred.tensor().data();
    let g = gt.tensor().data();
    let fg = |i: usize| g[i] == 1.0;

    let err: Vec<f64> = p.iter().zip(g).map(|(a, b)| (a - b).abs()).collect();
    let et: Vec<f64> = (0..h * w).map(|i| if fg(i) { err[i] } else { err[nearest[i]] }).collect();
    let ea = gaussian_filter(&et, h, w, cfg.wf_gauss_size, cfg.wf_gauss_sigma);

    let decay = 0.5f64.ln() / 5.0;
    let (mut fg_err, mut fg_count, mut fpw) = (0.0, 0usize, 0.0);
    for i in 0..h * w {
        if fg(i) {
            fg_err += if ea[i] < err[i] { ea[i] } else { err[i] };
            fg_count += 1;
        } else {
            let b = 2.0 - (decay * (dist[i] as f64).sqrt()).exp();
            fpw += err[i] * b;
        }
    }
    let tpw = fg_count as f64 - fg_err;
    let recall = 1.0 - fg_err / fg_count as f64;
    let precision = tpw / (EPS + tpw + fpw);
    let b = WEIGHTED_F_BETA_SQ;
    Ok((1.0 + b) * recall * precision / (EPS + recall + b * precision))
}
