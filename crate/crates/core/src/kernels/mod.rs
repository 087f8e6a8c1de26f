//! Attention and fusion blocks of the single-stream RGB-D saliency network,
//! plus the loss and learning-rate formulas used to train it.

mod bundle;
mod deda;
mod fusion;
mod pafe;
mod training;

pub use bundle::{BundleError, ConvEntry, WeightBundle, MANIFEST_FILE};
pub use deda::{
    apply_dual_attention, deda_gradient, depth_enhanced_background_attention,
    depth_enhanced_saliency_attention, mask_guided_attention, residual_fuse, AttentionMap,
    DepthMap, FuseStrategy,
};
pub use fusion::{early_fusion_first_layer, FusionVariant, FIRST_LAYER_CHANNELS};
pub use pafe::{DEFAULT_DILATION_RATES, pafe_attention, pafe_branch, pafe_module, PafeBranch, PafeConfig, PafeOutput};
pub use training::{bce_loss, poly_lr, BCE_CLAMP, POLY_POWER};

use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{0} must lie in [0, 1]")]
    OutOfUnitRange(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = KernelError> = std::result::Result<T, E>;

fn shape_err(op: &'static str, detail: impl Into<String>) -> KernelError {
    KernelError::Shape {
        op,
        detail: detail.into(),
    }
}
