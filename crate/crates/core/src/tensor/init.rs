use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Result, Tensor, TensorError};

/// Standard deviation `sqrt(2 / fan_in)` with `fan_in = in·kh·kw`.
pub fn he_std(shape: [usize; 4]) -> f64 {
    let [_, inp, kh, kw] = shape;
    (2.0 / (inp * kh * kw) as f64).sqrt()
}

/// He (Kaiming) normal initialisation of an `(out, in, kh, kw)` kernel.
/// The same seed always yields the same tensor.
pub fn he_init(shape: [usize; 4], seed: u64) -> Result<Tensor> {
    if shape.contains(&0) {
        return Err(TensorError::EmptyShape(shape.to_vec()));
    }
    let normal = Normal::new(0.0, he_std(shape))
        .map_err(|e| TensorError::InvalidArgument(format!("he_init: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| normal.sample(&mut rng))
}
