use super::{shape_err, KernelError, Result};
use crate::metrics::SaliencyMap;
use crate::tensor::{bilinear_resize, conv2d, sigmoid, ConvSpec, Tensor};

/// Depth map `(1, H, W)` with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap(Tensor);

impl DepthMap {
    pub fn new(values: Tensor) -> Result<Self> {
        let (c, _, _) = values.dims3("DepthMap")?;
        if c != 1 {
            return Err(shape_err("DepthMap", format!("expected one channel, got {:?}", values.shape())));
        }
        if values.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(KernelError::OutOfUnitRange("depth"));
        }
        Ok(Self(values))
    }

    pub fn zeros(h: usize, w: usize) -> Result<Self> {
        Self::new(Tensor::zeros([1, h, w])?)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn height_width(&self) -> (usize, usize) {
        (self.0.shape()[1], self.0.shape()[2])
    }

    /// Depth resampled to `h × w` (bilinear, half-pixel centres). Values stay
    /// in `[0, 1]` because bilinear weights are convex.
    pub fn resized(&self, h: usize, w: usize) -> Result<Self> {
        Ok(Self(bilinear_resize(&self.0, h, w)?))
    }
}

/// A spatial attention `(1, H, W)` or a pairwise position attention `(N, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap(Tensor);

impl AttentionMap {
    pub fn new(values: Tensor) -> Self {
        Self(values)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }
}

/// Largest double strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Mask-guided attention `A_m = σ(Conv(T + S + D))`, or `σ(Conv(T + D))` at the
/// top level where there is no previous decoder output.
///
/// The depth map is resized to the feature resolution and repeated across
/// channels before the sum. The convolution must map `C` channels to one and
/// keep the spatial extent. Saturated logits are clamped so every entry stays
/// strictly inside `(0, 1)`.
pub fn mask_guided_attention(
    transition: &Tensor,
    previous: Option<&Tensor>,
    depth: &DepthMap,
    conv: &ConvSpec,
) -> Result<AttentionMap> {
    let (c, h, w) = transition.dims3("mask_guided_attention")?;
    if conv.in_channels() != c || conv.out_channels() != 1 {
        return Err(shape_err(
            "mask_guided_attention",
            format!(
                "conv maps {} -> {} channels, need {c} -> 1",
                conv.in_channels(),
                conv.out_channels()
            ),
        ));
    }
    let mut fused = match previous {
        Some(s) => transition.add(s)?,
        None => transition.clone(),
    };
    let d = depth.resized(h, w)?.into_tensor().broadcast_channels(c)?;
    fused = fused.add(&d)?;
    let logits = conv2d(&fused, conv)?;
    if logits.shape() != [1, h, w] {
        return Err(shape_err(
            "mask_guided_attention",
            format!("conv changed the spatial extent to {:?}", logits.shape()),
        ));
    }
    Ok(AttentionMap(
        sigmoid(&logits).map(|v| v.clamp(f64::MIN_POSITIVE, BELOW_ONE)),
    ))
}

fn spatial_pair<'a>(
    op: &'static str,
    a_m: &'a AttentionMap,
    d: &'a DepthMap,
) -> Result<(&'a Tensor, &'a Tensor)> {
    let a = a_m.tensor();
    if a.shape() != d.tensor().shape() {
        return Err(shape_err(
            op,
            format!("attention {:?} vs depth {:?}", a.shape(), d.tensor().shape()),
        ));
    }
    Ok((a, d.tensor()))
}

/// Saliency-branch attention `A_sd = A_m·A_m + A_m·D`.
pub fn depth_enhanced_saliency_attention(a_m: &AttentionMap, d: &DepthMap) -> Result<AttentionMap> {
    let (a, d) = spatial_pair("depth_enhanced_saliency_attention", a_m, d)?;
    Ok(AttentionMap(a.zip_with(d, "A_sd", |a, d| a * a + a * d)?))
}

/// Background-branch attention `A_bd = (1 − A_m)·(1 − A_m) + (1 − A_m)·D`.
pub fn depth_enhanced_background_attention(a_m: &AttentionMap, d: &DepthMap) -> Result<AttentionMap> {
    let (a, d) = spatial_pair("depth_enhanced_background_attention", a_m, d)?;
    Ok(AttentionMap(a.zip_with(d, "A_bd", |a, d| {
        let c = 1.0 - a;
        c * c + c * d
    })?))
}

/// Element-wise `dA_sd/dA_m = 2·A_m + D`.
pub fn deda_gradient(a_m: &AttentionMap, d: &DepthMap) -> Result<Tensor> {
    let (a, d) = spatial_pair("deda_gradient", a_m, d)?;
    Ok(a.zip_with(d, "deda_gradient", |a, d| 2.0 * a + d)?)
}

/// Multiplies every channel of `feature` by a `(1, H, W)` attention map.
pub fn apply_dual_attention(feature: &Tensor, a: &AttentionMap) -> Result<Tensor> {
    let (c, h, w) = feature.dims3("apply_dual_attention")?;
    if a.tensor().shape() != [1, h, w] {
        return Err(shape_err(
            "apply_dual_attention",
            format!("feature {:?} vs attention {:?}", feature.shape(), a.tensor().shape()),
        ));
    }
    Ok(feature.mul(&a.tensor().broadcast_channels(c)?)?)
}

/// How the saliency and background branch logits are merged into the final
/// prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FuseStrategy {
    /// `σ(s + (s − b))`
    #[default]
    Residual,
    /// `σ(s − b)`
    Difference,
    /// `σ(s + (1 − σ(b)))`
    ComplementGate,
}

pub fn residual_fuse(
    saliency_logits: &Tensor,
    background_logits: &Tensor,
    strategy: FuseStrategy,
) -> Result<SaliencyMap> {
    let (c, _, _) = saliency_logits.dims3("residual_fuse")?;
    if c != 1 {
        return Err(shape_err("residual_fuse", "branch outputs must be single-channel"));
    }
    let fused = saliency_logits.zip_with(background_logits, "residual_fuse", |s, b| match strategy {
        FuseStrategy::Residual => s + (s - b),
        FuseStrategy::Difference => s - b,
        FuseStrategy::ComplementGate => s + (1.0 - 1.0 / (1.0 + (-b).exp())),
    })?;
    let map = sigmoid(&fused);
    SaliencyMap::new(map).map_err(|e| KernelError::Config(e.to_string()))
}
