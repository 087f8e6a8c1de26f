use super::{Result, Tensor, TensorError};

/// Element-wise logistic function, evaluated so that large negative inputs
/// do not overflow `exp`.
pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

#[inline]
pub(crate) fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Softmax along the last axis of an `(R, K)` tensor, with max subtraction.
pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    let (r, k) = x.dims2("softmax_rows")?;
    let mut out = x.data().to_vec();
    for row in out.chunks_exact_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(Tensor::from_parts(vec![r, k], out))
}

/// `(M, K) × (K, N) -> (M, N)`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2("matmul")?;
    let (k2, n) = b.dims2("matmul")?;
    if k != k2 {
        return Err(TensorError::ShapeMismatch {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let dst = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            for (d, &bv) in dst.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *d += aip * bv;
            }
        }
    }
    Ok(Tensor::from_parts(vec![m, n], out))
}

/// Per-channel mean of a `(C, H, W)` tensor, returned as `(C, 1, 1)`.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.dims3("global_avg_pool")?;
    let plane = h * w;
    let data = x
        .data()
        .chunks_exact(plane)
        .map(|ch| ch.iter().sum::<f64>() / plane as f64)
        .collect();
    Ok(Tensor::from_parts(vec![c, 1, 1], data))
}

/// Bilinear resampling of `(C, H, W)` with half-pixel centres
/// (align-corners = false): output index `i` samples the source at
/// `(i + 0.5)·(in/out) − 0.5`, clamped to `[0, in − 1]`.
pub fn bilinear_resize(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = x.dims3("bilinear_resize")?;
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::InvalidArgument(format!(
            "bilinear_resize target {out_h}x{out_w} must be positive"
        )));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(x.clone());
    }
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|i| {
                let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let lo = src.floor() as usize;
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let ys = taps(h, out_h);
    let xs = taps(w, out_w);
    let src = x.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, ly) in &ys {
            for &(x0, x1, lx) in &xs {
                // lerp as a + t·(b − a) so constant neighbourhoods stay exact
                let top = plane[y0 * w + x0] + lx * (plane[y0 * w + x1] - plane[y0 * w + x0]);
                let bot = plane[y1 * w + x0] + lx * (plane[y1 * w + x1] - plane[y1 * w + x0]);
                out.push(top + ly * (bot - top));
            }
        }
    }
    Ok(Tensor::from_parts(vec![c, out_h, out_w], out))
}
