//! Seeded synthetic inputs shared by the checks and the demo.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sodbench_core::metrics::{GroundTruthMask, SaliencyMap};
use sodbench_core::Tensor;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform entries in `[lo, hi)`.
pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(lo..hi)).expect("non-empty shape")
}

/// Entries strictly inside `(0, 1)`.
pub fn open_unit(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| {
        let v: f64 = rng.random();
        v.max(f64::MIN_POSITIVE)
    })
    .expect("non-empty shape")
}

/// A disk-shaped mask with 10% of pixels flipped, and an 8-bit prediction
/// correlated with it.
pub fn random_pair(rng: &mut ChaCha8Rng, h: usize, w: usize) -> (SaliencyMap, GroundTruthMask) {
    let (cy, cx) = (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64));
    let r = rng.random_range(1.0..(h.max(w) as f64 / 2.0).max(1.5));
    let mut g = Vec::with_capacity(h * w);
    let mut p = Vec::with_capacity(h * w);
    for i in 0..h * w {
        let (y, x) = ((i / w) as f64, (i % w) as f64);
        let inside = (y - cy).powi(2) + (x - cx).powi(2) < r * r;
        let bit = inside ^ (rng.random::<f64>() < 0.1);
        let gv = if bit { 1.0 } else { 0.0 };
        let v = 0.6 * gv + 0.4 * rng.random::<f64>();
        g.push(gv);
        p.push((v * 255.0).round() / 255.0);
    }
    (
        SaliencyMap::new(Tensor::new([1, h, w], p).unwrap()).unwrap(),
        GroundTruthMask::new(Tensor::new([1, h, w], g).unwrap()).unwrap(),
    )
}

/// Random binary mask with at least one foreground and one background pixel.
pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> GroundTruthMask {
    loop {
        let (_, g) = random_pair(rng, h, w);
        let fg = g.foreground_count();
        if fg > 0 && fg < h * w {
            return g;
        }
    }
}

/// Depth 1 inside a centred disk of radius `side / 4`, 0 outside.
pub fn disk_depth(h: usize, w: usize) -> Tensor {
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let r = h.min(w) as f64 / 4.0;
    Tensor::from_fn([1, h, w], |i| {
        let (y, x) = ((i / w) as f64, (i % w) as f64);
        if (y - cy).powi(2) + (x - cx).powi(2) <= r * r { 1.0 } else { 0.0 }
    })
    .expect("non-empty shape")
}
