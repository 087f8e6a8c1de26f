//! Plain dense metric implementations over row-major slices.
//!
//! Everything here works pixel by pixel on `f64` values and `bool` masks, with
//! no shared code from the library under test.

#![allow(dead_code)]

const EPS: f64 = f64::EPSILON;

pub struct Pair<'a> {
    pub h: usize,
    pub w: usize,
    pub pred: &'a [f64],
    pub gt: &'a [bool],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 { 0.0 } else { self.tp as f64 / (self.tp + self.fp) as f64 }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 { 0.0 } else { self.tp as f64 / (self.tp + self.fn_) as f64 }
    }
}

pub fn level(v: f64) -> u32 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u32
}

fn confusion(on: &[bool], gt: &[bool]) -> Confusion {
    let mut c = Confusion::default();
    for (&p, &g) in on.iter().zip(gt) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

pub fn mae(p: &Pair) -> f64 {
    let mut total = 0.0;
    for i in 0..p.pred.len() {
        total += (p.pred[i] - if p.gt[i] { 1.0 } else { 0.0 }).abs();
    }
    total / p.pred.len() as f64
}

/// Counts with foreground `level > t`, for t = 0..=255.
pub fn counts_at(p: &Pair, t: u32) -> Confusion {
    let on: Vec<bool> = p.pred.iter().map(|&v| level(v) > t).collect();
    confusion(&on, p.gt)
}

pub fn f_beta(precision: f64, recall: f64, beta_sq: f64) -> f64 {
    let den = beta_sq * precision + recall;
    if den == 0.0 { 0.0 } else { (1.0 + beta_sq) * precision * recall / den }
}

pub fn f_max(p: &Pair, beta_sq: f64) -> f64 {
    let mut best: f64 = 0.0;
    for t in 0..=255 {
        let c = counts_at(p, t);
        best = best.max(f_beta(c.precision(), c.recall(), beta_sq));
    }
    best
}

fn adaptive_on(p: &Pair) -> Vec<bool> {
    let mean = p.pred.iter().map(|&v| level(v) as f64).sum::<f64>() / p.pred.len() as f64;
    let thr = (2.0 * mean).min(255.0);
    p.pred.iter().map(|&v| level(v) > 0 && level(v) as f64 >= thr).collect()
}

pub fn f_mean(p: &Pair, beta_sq: f64) -> f64 {
    let c = confusion(&adaptive_on(p), p.gt);
    f_beta(c.precision(), c.recall(), beta_sq)
}

pub fn e_measure(p: &Pair) -> f64 {
    let fm: Vec<f64> = adaptive_on(p).iter().map(|&b| b as u8 as f64).collect();
    let g: Vec<f64> = p.gt.iter().map(|&b| b as u8 as f64).collect();
    let n = g.len() as f64;
    let fg = g.iter().sum::<f64>();
    let mut score = 0.0;
    for i in 0..g.len() {
        score += if fg == 0.0 {
            1.0 - fm[i]
        } else if fg == n {
            fm[i]
        } else {
            let a = fm[i] - fm.iter().sum::<f64>() / n;
            let b = g[i] - fg / n;
            let xi = 2.0 * a * b / (a * a + b * b + EPS);
            (1.0 + xi).powi(2) / 4.0
        };
    }
    score / n
}

fn object_score(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    2.0 * mean / (mean * mean + 1.0 + std + EPS)
}

fn ssim(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        vx += (x[i] - mx).powi(2);
        vy += (y[i] - my).powi(2);
        cxy += (x[i] - mx) * (y[i] - my);
    }
    let d = n - 1.0 + EPS;
    let (vx, vy, cxy) = (vx / d, vy / d, cxy / d);
    let num = 4.0 * mx * my * cxy;
    let den = (mx * mx + my * my) * (vx + vy);
    if num != 0.0 {
        num / (den + EPS)
    } else if den == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Object and region terms of the structure measure for a mask with both
/// classes present.
pub fn s_components(p: &Pair) -> (f64, f64) {
    let g: Vec<f64> = p.gt.iter().map(|&b| b as u8 as f64).collect();
    let u = g.iter().sum::<f64>() / g.len() as f64;
    let fg: Vec<f64> = (0..g.len()).filter(|&i| p.gt[i]).map(|i| p.pred[i]).collect();
    let bg: Vec<f64> = (0..g.len()).filter(|&i| !p.gt[i]).map(|i| 1.0 - p.pred[i]).collect();
    let so = u * object_score(&fg) + (1.0 - u) * object_score(&bg);

    let (mut rows, mut cols, mut k) = (0.0, 0.0, 0.0);
    for r in 0..p.h {
        for c in 0..p.w {
            if p.gt[r * p.w + c] {
                rows += (r + 1) as f64;
                cols += (c + 1) as f64;
                k += 1.0;
            }
        }
    }
    let (cy, cx) = ((rows / k).round() as usize, (cols / k).round() as usize);
    let mut sr = 0.0;
    for (r0, r1, c0, c1) in [(0, cy, 0, cx), (0, cy, cx, p.w), (cy, p.h, 0, cx), (cy, p.h, cx, p.w)] {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for r in r0..r1 {
            for c in c0..c1 {
                xs.push(p.pred[r * p.w + c]);
                ys.push(g[r * p.w + c]);
            }
        }
        if !xs.is_empty() {
            sr += xs.len() as f64 / (p.h * p.w) as f64 * ssim(&xs, &ys);
        }
    }
    (so, sr)
}

pub fn s_measure(p: &Pair, alpha: f64) -> f64 {
    let u = p.gt.iter().filter(|&&b| b).count() as f64 / p.gt.len() as f64;
    let mean_pred = p.pred.iter().sum::<f64>() / p.pred.len() as f64;
    if u == 0.0 {
        return 1.0 - mean_pred;
    }
    if u == 1.0 {
        return mean_pred;
    }
    let (so, sr) = s_components(p);
    (alpha * so + (1.0 - alpha) * sr).max(0.0)
}

/// Weighted F-measure with β² = 1, a 7×7 Gaussian of σ = 5 and zero padding.
/// Background errors are propagated from the nearest foreground pixel, ties
/// going to the first in row-major order.
pub fn f_weighted(p: &Pair) -> f64 {
    let (h, w) = (p.h as i64, p.w as i64);
    let n = p.pred.len();
    let g: Vec<f64> = p.gt.iter().map(|&b| b as u8 as f64).collect();
    let e: Vec<f64> = (0..n).map(|i| (p.pred[i] - g[i]).abs()).collect();
    let fg: Vec<usize> = (0..n).filter(|&i| p.gt[i]).collect();

    let mut et = e.clone();
    let mut dist = vec![0.0; n];
    for i in 0..n {
        if p.gt[i] {
            continue;
        }
        let (y, x) = (i as i64 / w, i as i64 % w);
        let mut best = (i64::MAX, 0);
        for &j in &fg {
            let (fy, fx) = (j as i64 / w, j as i64 % w);
            let d = (fy - y).pow(2) + (fx - x).pow(2);
            if d < best.0 {
                best = (d, j);
            }
        }
        et[i] = e[best.1];
        dist[i] = (best.0 as f64).sqrt();
    }

    let mut weights = [[0.0; 7]; 7];
    let mut total = 0.0;
    for (dy, row) in weights.iter_mut().enumerate() {
        for (dx, k) in row.iter_mut().enumerate() {
            let r2 = ((dy as i64 - 3).pow(2) + (dx as i64 - 3).pow(2)) as f64;
            *k = (-r2 / 50.0).exp();
            total += *k;
        }
    }

    let mut ew = vec![0.0; n];
    for i in 0..n {
        let (y, x) = (i as i64 / w, i as i64 % w);
        if p.gt[i] {
            let mut ea = 0.0;
            for (dy, row) in weights.iter().enumerate() {
                for (dx, k) in row.iter().enumerate() {
                    let (yy, xx) = (y + dy as i64 - 3, x + dx as i64 - 3);
                    if (0..h).contains(&yy) && (0..w).contains(&xx) {
                        ea += k / total * et[(yy * w + xx) as usize];
                    }
                }
            }
            ew[i] = if ea < e[i] { ea } else { e[i] };
        } else {
            ew[i] = e[i] * (2.0 - (0.5f64.ln() / 5.0 * dist[i]).exp());
        }
    }

    let fg_err: f64 = fg.iter().map(|&i| ew[i]).sum();
    let bg_err: f64 = (0..n).filter(|&i| !p.gt[i]).map(|i| ew[i]).sum();
    let tpw = fg.len() as f64 - fg_err;
    let recall = 1.0 - fg_err / fg.len() as f64;
    let precision = tpw / (EPS + tpw + bg_err);
    2.0 * recall * precision / (EPS + recall + precision)
}
