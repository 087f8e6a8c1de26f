use super::{ensure_same_shape, EvalConfig, GroundTruthMask, Result, SaliencyMap};

const EPS: f64 = f64::EPSILON;

/// Mean and sample standard deviation (`n − 1` denominator; zero for one value).
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (sum, n) = values.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Object-aware similarity: foreground and background each score
/// `2x / (x² + 1 + σ_x)` from the mean `x` and deviation `σ_x` of the
/// prediction (background: of `1 − pred`) over that region, and are mixed by
/// the foreground area ratio.
pub fn s_object(pred: &SaliencyMap, gt: &GroundTruthMask) -> Result<f64> {
    ensure_same_shape(pred, gt)?;
    let p = pred.tensor().data();
    let g = gt.tensor().data();
    let score = |(x, sigma): (f64, f64)| 2.0 * x / (x * x + 1.0 + sigma + EPS);
    let fg = mean_std(p.iter().zip(g).filter(|(_, &g)| g == 1.0).map(|(&p, _)| p));
    let bg = mean_std(p.iter().zip(g).filter(|(_, &g)| g == 0.0).map(|(&p, _)| 1.0 - p));
    let u = gt.tensor().mean();
    Ok(u * score(fg) + (1.0 - u) * score(bg))
}

/// Structural similarity of one rectangular block of prediction and mask.
fn block_ssim(p: &[f64], g: &[f64], w: usize, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
    let n = (rows.len() * cols.len()) as f64;
    let cells = || rows.clone().flat_map(|y| cols.clone().map(move |x| y * w + x));
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in cells() {
        sx += p[i];
        sy += g[i];
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for i in cells() {
        let (dx, dy) = (p[i] - mx, g[i] - my);
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    let den = n - 1.0 + EPS;
    let (vx, vy, cxy) = (vx / den, vy / den, cxy / den);
    let alpha = 4.0 * mx * my * cxy;
    let beta = (mx * mx + my * my) * (vx + vy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Foreground centroid as 1-based `(column, row)`, rounded half away from
/// zero; the image centre for an empty mask.
fn centroid(gt: &GroundTruthMask) -> (usize, usize) {
    let (h, w) = gt.height_width();
    let g = gt.tensor().data();
    let (mut total, mut sx, mut sy) = (0u64, 0u64, 0u64);
    for (i, _) in g.iter().enumerate().filter(|(_, &v)| v == 1.0) {
        total += 1;
        sx += (i % w + 1) as u64;
        sy += (i / w + 1) as u64;
    }
    if total == 0 {
        return ((w as f64 / 2.0).round() as usize, (h as f64 / 2.0).round() as usize);
    }
    (
        (sx as f64 / total as f64).round() as usize,
        (sy as f64 / total as f64).round() as usize,
    )
}

/// Region-aware similarity: split both maps into four blocks at the
/// foreground centroid and sum the block similarities weighted by block area.
pub fn s_region(pred: &SaliencyMap, gt: &GroundTruthMask) -> Result<f64> {
    ensure_same_shape(pred, gt)?;
    let (h, w) = gt.height_width();
    let (x, y) = centroid(gt);
    let p = pred.tensor().data();
    let g = gt.tensor().data();
    let area = (h * w) as f64;
    let blocks = [(0..y, 0..x), (0..y, x..w), (y..h, 0..x), (y..h, x..w)];
    Ok(blocks
        .into_iter()
        .filter(|(r, c)| !r.is_empty() && !c.is_empty())
        .map(|(r, c)| {
            let weight = (r.len() * c.len()) as f64 / area;
            weight * block_ssim(p, g, w, r, c)
        })
        .sum())
}

/// `(S_o, S_r)` for a mask with both foreground and background.
pub fn s_measure_components(pred: &SaliencyMap, gt: &GroundTruthMask) -> Result<(f64, f64)> {
    Ok((s_object(pred, gt)?, s_region(pred, gt)?))
}

/// Structure measure `α·S_o + (1 − α)·S_r`, floored at zero. An empty mask
/// scores `1 − mean(pred)` and a full mask `mean(pred)`.
pub fn s_measure(pred: &SaliencyMap, gt: &GroundTruthMask, cfg: &EvalConfig) -> Result<f64> {
    ensure_same_shape(pred, gt)?;
    let y = gt.tensor().mean();
    let x = pred.tensor().mean();
    if y == 0.0 {
        return Ok(1.0 - x);
    }
    if y == 1.0 {
        return Ok(x);
    }
    let (so, sr) = s_measure_components(pred, gt)?;
    Ok((cfg.alpha * so + (1.0 - cfg.alpha) * sr).max(0.0))
}
