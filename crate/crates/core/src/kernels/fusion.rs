use super::{shape_err, DepthMap, KernelError, Result};
use crate::tensor::{conv2d, he_init, ConvSpec, Tensor};

/// Width of the first encoder layer.
pub const FIRST_LAYER_CHANNELS: usize = 64;

/// How depth enters the first convolution of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionVariant {
    /// RGB and depth concatenated into four channels; He-initialised layer.
    CatHe(ConvSpec),
    /// Depth added to each colour channel; He-initialised 3-channel layer.
    AddHe(ConvSpec),
    /// Depth added to each colour channel; supplied pretrained 3-channel layer.
    AddP(ConvSpec),
}

fn he_first_layer(in_channels: usize, seed: u64) -> Result<ConvSpec> {
    Ok(ConvSpec::same(
        he_init([FIRST_LAYER_CHANNELS, in_channels, 3, 3], seed)?,
        Tensor::zeros([FIRST_LAYER_CHANNELS])?,
        1,
    )?)
}

impl FusionVariant {
    pub fn cat_he(seed: u64) -> Result<Self> {
        Ok(Self::CatHe(he_first_layer(4, seed)?))
    }

    pub fn add_he(seed: u64) -> Result<Self> {
        Ok(Self::AddHe(he_first_layer(3, seed)?))
    }

    pub fn add_p(pretrained: ConvSpec) -> Result<Self> {
        let v = Self::AddP(pretrained);
        v.validate()?;
        Ok(v)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::CatHe(_) => "cat_he",
            Self::AddHe(_) => "add_he",
            Self::AddP(_) => "add_p",
        }
    }

    pub fn first_layer(&self) -> &ConvSpec {
        match self {
            Self::CatHe(c) | Self::AddHe(c) | Self::AddP(c) => c,
        }
    }

    pub fn expected_in_channels(&self) -> usize {
        match self {
            Self::CatHe(_) => 4,
            Self::AddHe(_) | Self::AddP(_) => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let conv = self.first_layer();
        if conv.in_channels() != self.expected_in_channels() || conv.out_channels() != FIRST_LAYER_CHANNELS {
            return Err(KernelError::Config(format!(
                "{} first layer must map {} -> {FIRST_LAYER_CHANNELS} channels, got {:?}",
                self.tag(),
                self.expected_in_channels(),
                conv.kernel().shape()
            )));
        }
        Ok(())
    }

    /// Copy of a four-channel layer with the depth input column set to zero.
    pub fn with_zeroed_depth_column(&self) -> Result<Self> {
        let Self::CatHe(conv) = self else {
            return Err(KernelError::Config("only cat_he has a depth column".into()));
        };
        let [o, i, kh, kw] = *conv.kernel().shape() else { unreachable!() };
        let plane = kh * kw;
        let kernel = Tensor::from_fn([o, i, kh, kw], |idx| {
            if (idx / plane) % i == 3 { 0.0 } else { conv.kernel().data()[idx] }
        })?;
        Ok(Self::CatHe(ConvSpec::new(kernel, conv.bias().clone(), conv.stride, conv.padding, conv.dilation)?))
    }

    /// The colour columns of a four-channel layer as a 3-channel convolution.
    pub fn rgb_columns(&self) -> Result<ConvSpec> {
        let Self::CatHe(conv) = self else {
            return Ok(self.first_layer().clone());
        };
        let [o, i, kh, kw] = *conv.kernel().shape() else { unreachable!() };
        let plane = kh * kw;
        let src = conv.kernel().data();
        let kernel = Tensor::from_fn([o, 3, kh, kw], |idx| {
            let (oc, rest) = (idx / (3 * plane), idx % (3 * plane));
            src[oc * i * plane + rest]
        })?;
        Ok(ConvSpec::new(kernel, conv.bias().clone(), conv.stride, conv.padding, conv.dilation)?)
    }
}

/// First encoder layer over RGB + depth: four-channel concatenation for
/// `CatHe`, depth added to every colour channel for the `Add*` variants.
pub fn early_fusion_first_layer(rgb: &Tensor, depth: &DepthMap, variant: &FusionVariant) -> Result<Tensor> {
    variant.validate()?;
    let (c, h, w) = rgb.dims3("early_fusion_first_layer")?;
    if c != 3 || depth.height_width() != (h, w) {
        return Err(shape_err(
            "early_fusion_first_layer",
            format!("rgb {:?} vs depth {:?}", rgb.shape(), depth.tensor().shape()),
        ));
    }
    let fused = match variant {
        FusionVariant::CatHe(_) => Tensor::concat_channels(&[rgb, depth.tensor()])?,
        FusionVariant::AddHe(_) | FusionVariant::AddP(_) => rgb.add(&depth.tensor().broadcast_channels(3)?)?,
    };
    Ok(conv2d(&fused, variant.first_layer())?)
}
