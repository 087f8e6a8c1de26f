//! Kernels and evaluation metrics for single-stream RGB-D salient object
//! detection.
//!
//! * [`tensor`]: dense `f64` tensors, convolution, resampling, initialisation
//!   and a finite-difference gradient oracle.
//! * [`kernels`]: depth-enhanced dual attention, pyramid attention, early
//!   fusion of depth into the first layer, and training-time formulas.
//! * [`metrics`]: MAE, PR curves, F-measures, S-measure and E-measure with
//!   dataset aggregation.
//! * [`io`]: map decoding, depth normalisation and directory pairing.

pub mod io;
pub mod kernels;
pub mod metrics;
pub mod tensor;

pub use tensor::{ConvSpec, Tensor, TensorError};
