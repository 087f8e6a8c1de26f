//! Dense row-major `f64` tensors and the handful of kernels the attention
//! blocks and metrics are built from.

mod conv;
mod grad;
mod init;
mod ops;
mod serial;

pub use conv::{conv2d, conv2d_backward_input, ConvSpec};
pub use grad::{finite_diff_grad, DEFAULT_FD_EPS};
pub use init::{he_init, he_std};
pub use ops::{bilinear_resize, global_avg_pool, matmul, sigmoid, softmax_rows};
pub use serial::{load_tensor, read_tensor, save_tensor, write_tensor, TENSOR_MAGIC};

use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("shape {shape:?} holds {expected} values but {actual} were supplied")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape {0:?} has a zero or missing extent")]
    EmptyShape(Vec<usize>),
    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("{op}: shape mismatch, lhs={lhs:?} rhs={rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected a rank-{expected} tensor, got shape {actual:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        actual: Vec<usize>,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("objective is not finite ({value}) when perturbing coordinate {index}")]
    NonFiniteObjective { index: usize, value: f64 },
    #[error("malformed tensor container: {0}")]
    Container(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

/// Dense n-dimensional array of `f64`, row-major with the last axis fastest.
///
/// Every constructor that accepts external data checks that the shape is
/// non-empty and that all values are finite.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        let head = &self.data[..self.data.len().min(PREVIEW)];
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &format_args!("{head:?}{}", if self.data.len() > PREVIEW { " .." } else { "" }))
            .finish()
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(TensorError::EmptyShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        let expected = check_shape(&shape)?;
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TensorError::NonFinite { index, value });
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for kernels whose output length is correct by
    /// construction.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Result<Self> {
        let shape = shape.into();
        let n = check_shape(&shape)?;
        Self::new(shape, vec![value; n])
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    /// Builds a tensor by evaluating `f` at every flat index.
    pub fn from_fn(shape: impl Into<Vec<usize>>, f: impl FnMut(usize) -> f64) -> Result<Self> {
        let shape = shape.into();
        let n = check_shape(&shape)?;
        Self::new(shape, (0..n).map(f).collect())
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn([n, n], |i| if i / n == i % n { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Returns `(C, H, W)` for a rank-3 tensor.
    pub fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(TensorError::Rank {
                op,
                expected: 3,
                actual: self.shape.clone(),
            }),
        }
    }

    /// Returns `(R, K)` for a rank-2 tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match *self.shape.as_slice() {
            [r, k] => Ok((r, k)),
            _ => Err(TensorError::Rank {
                op,
                expected: 2,
                actual: self.shape.clone(),
            }),
        }
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        let n = check_shape(&shape)?;
        if n != self.data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape,
                rhs: shape,
            });
        }
        Ok(Self {
            shape,
            data: self.data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        self.ensure_same_shape(other, op)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_parts(self.shape.clone(), data))
    }

    pub fn ensure_same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.ensure_same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Element `(c, y, x)` of a rank-3 tensor. Panics when out of range.
    pub fn at3(&self, c: usize, y: usize, x: usize) -> f64 {
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x]
    }

    /// Element `(r, k)` of a rank-2 tensor. Panics when out of range.
    pub fn at2(&self, r: usize, k: usize) -> f64 {
        self.data[r * self.shape[1] + k]
    }

    /// Extracts channel `c` of a `(C, H, W)` tensor as `(1, H, W)`.
    pub fn channel(&self, c: usize) -> Result<Self> {
        let (channels, h, w) = self.dims3("channel")?;
        if c >= channels {
            return Err(TensorError::InvalidArgument(format!(
                "channel {c} out of range for {channels} channels"
            )));
        }
        let plane = h * w;
        Ok(Self::from_parts(
            vec![1, h, w],
            self.data[c * plane..(c + 1) * plane].to_vec(),
        ))
    }

    /// Repeats a `(1, H, W)` map across `channels` channels.
    pub fn broadcast_channels(&self, channels: usize) -> Result<Self> {
        let (c, h, w) = self.dims3("broadcast_channels")?;
        if c != 1 || channels == 0 {
            return Err(TensorError::InvalidArgument(format!(
                "broadcast_channels needs a single-channel map and a positive target, got {:?} -> {channels}",
                self.shape
            )));
        }
        let mut data = Vec::with_capacity(channels * h * w);
        for _ in 0..channels {
            data.extend_from_slice(&self.data);
        }
        Ok(Self::from_parts(vec![channels, h, w], data))
    }

    /// Concatenates `(C_i, H, W)` tensors along the channel axis.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::InvalidArgument("concat_channels of nothing".into()))?;
        let (_, h, w) = first.dims3("concat_channels")?;
        let mut channels = 0;
        let mut data = Vec::new();
        for part in parts {
            let (c, ph, pw) = part.dims3("concat_channels")?;
            if (ph, pw) != (h, w) {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_channels",
                    lhs: first.shape.clone(),
                    rhs: part.shape.clone(),
                });
            }
            channels += c;
            data.extend_from_slice(&part.data);
        }
        Ok(Self::from_parts(vec![channels, h, w], data))
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&self) -> Result<Self> {
        let (r, k) = self.dims2("transpose")?;
        let mut data = vec![0.0; r * k];
        for i in 0..r {
            for j in 0..k {
                data[j * r + i] = self.data[i * k + j];
            }
        }
        Ok(Self::from_parts(vec![k, r], data))
    }
}
