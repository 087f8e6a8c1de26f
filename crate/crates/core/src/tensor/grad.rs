use super::{Result, Tensor, TensorError};

pub const DEFAULT_FD_EPS: f64 = 1e-5;

/// Central-difference gradient of a scalar function:
/// `(f(x + eps·e_i) − f(x − eps·e_i)) / (2·eps)` for every coordinate `i`.
pub fn finite_diff_grad<F>(f: F, x: &Tensor, eps: f64) -> Result<Tensor>
where
    F: Fn(&Tensor) -> f64,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(TensorError::InvalidArgument(format!(
            "finite difference step must be positive, got {eps}"
        )));
    }
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        for value in [plus, minus] {
            if !value.is_finite() {
                return Err(TensorError::NonFiniteObjective { index: i, value });
            }
        }
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(Tensor::from_parts(x.shape().to_vec(), grad))
}
