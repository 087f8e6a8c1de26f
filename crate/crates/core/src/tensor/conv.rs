use super::{Result, Tensor, TensorError};

/// Weights and geometry of a 2-D convolution (cross-correlation, no kernel flip).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    kernel: Tensor,
    bias: Tensor,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvSpec {
    /// `kernel` is `(out, in, kh, kw)` with odd spatial extents, `bias` is `(out)`.
    pub fn new(
        kernel: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
        dilation: usize,
    ) -> Result<Self> {
        let [out, _, kh, kw] = *kernel.shape() else {
            return Err(TensorError::Rank {
                op: "ConvSpec::new",
                expected: 4,
                actual: kernel.shape().to_vec(),
            });
        };
        if bias.shape() != [out] {
            return Err(TensorError::ShapeMismatch {
                op: "ConvSpec::new (bias)",
                lhs: kernel.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(TensorError::InvalidArgument(format!(
                "kernel extents must be odd, got {kh}x{kw}"
            )));
        }
        if stride == 0 || dilation == 0 {
            return Err(TensorError::InvalidArgument(
                "stride and dilation must be positive".into(),
            ));
        }
        Ok(Self {
            kernel,
            bias,
            stride,
            padding,
            dilation,
        })
    }

    /// Stride-1 convolution whose padding preserves the spatial extent.
    pub fn same(kernel: Tensor, bias: Tensor, dilation: usize) -> Result<Self> {
        let kh = kernel.shape().get(2).copied().unwrap_or(1);
        let kw = kernel.shape().get(3).copied().unwrap_or(1);
        if kh != kw {
            return Err(TensorError::InvalidArgument(format!(
                "same padding needs a square kernel, got {kh}x{kw}"
            )));
        }
        Self::new(kernel, bias, 1, dilation * (kh.saturating_sub(1)) / 2, dilation)
    }

    /// Zero weights and bias, stride 1, same padding.
    pub fn zeros(out: usize, inp: usize, k: usize, dilation: usize) -> Result<Self> {
        Self::same(Tensor::zeros([out, inp, k, k])?, Tensor::zeros([out])?, dilation)
    }

    /// 1×1 convolution computing `out[o] = Σ_i w[o][i]·in[i] + b[o]`.
    pub fn pointwise(weights: Tensor, bias: Tensor) -> Result<Self> {
        let (out, inp) = weights.dims2("ConvSpec::pointwise")?;
        Self::same(weights.reshape([out, inp, 1, 1])?, bias, 1)
    }

    /// 1×1 channel-preserving identity.
    pub fn identity(channels: usize) -> Result<Self> {
        Self::pointwise(Tensor::identity(channels)?, Tensor::zeros([channels])?)
    }

    pub fn kernel(&self) -> &Tensor {
        &self.kernel
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernel.shape()[2], self.kernel.shape()[3])
    }

    /// Output spatial size for an `h × w` input.
    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel_size();
        let extent = |n: usize, k: usize| -> Option<usize> {
            let span = self.dilation * (k - 1) + 1;
            let padded = n + 2 * self.padding;
            (padded >= span).then(|| (padded - span) / self.stride + 1)
        };
        match (extent(h, kh), extent(w, kw)) {
            (Some(oh), Some(ow)) => Ok((oh, ow)),
            _ => Err(TensorError::InvalidArgument(format!(
                "{h}x{w} input is smaller than the dilated {kh}x{kw} kernel"
            ))),
        }
    }
}

/// Input coordinate hit by output position `o` and kernel tap `k`, if any.
#[inline]
fn source(o: usize, k: usize, spec: &ConvSpec, n: usize) -> Option<usize> {
    let pos = (o * spec.stride + k * spec.dilation) as isize - spec.padding as isize;
    (pos >= 0 && (pos as usize) < n).then_some(pos as usize)
}

/// Zero-padded 2-D cross-correlation of a `(C_in, H, W)` input.
///
/// Each output value accumulates input channels in order, then kernel rows,
/// then kernel columns, and adds the bias last.
pub fn conv2d(input: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let (c_in, h, w) = input.dims3("conv2d")?;
    if c_in != spec.in_channels() {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            lhs: input.shape().to_vec(),
            rhs: spec.kernel.shape().to_vec(),
        });
    }
    let (oh, ow) = spec.output_size(h, w)?;
    let (kh, kw) = spec.kernel_size();
    let c_out = spec.out_channels();
    let x = input.data();
    let k = spec.kernel.data();

    let mut out = vec![0.0; c_out * oh * ow];
    for o in 0..c_out {
        let acc = &mut out[o * oh * ow..(o + 1) * oh * ow];
        for ci in 0..c_in {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wt = k[((o * c_in + ci) * kh + ky) * kw + kx];
                    for oy in 0..oh {
                        let Some(iy) = source(oy, ky, spec, h) else {
                            continue;
                        };
                        let row = &plane[iy * w..(iy + 1) * w];
                        let dst = &mut acc[oy * ow..(oy + 1) * ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            if let Some(ix) = source(ox, kx, spec, w) {
                                *d += wt * row[ix];
                            }
                        }
                    }
                }
            }
        }
        let b = spec.bias.data()[o];
        acc.iter_mut().for_each(|v| *v += b);
    }
    Ok(Tensor::from_parts(vec![c_out, oh, ow], out))
}

/// Adjoint of [`conv2d`] with respect to its input: maps an upstream
/// gradient `(C_out, H', W')` to the gradient over the `(C_in, H, W)` input.
pub fn conv2d_backward_input(
    grad_out: &Tensor,
    spec: &ConvSpec,
    input_hw: (usize, usize),
) -> Result<Tensor> {
    let (h, w) = input_hw;
    let (oh, ow) = spec.output_size(h, w)?;
    let (c_out, gh, gw) = grad_out.dims3("conv2d_backward_input")?;
    if (c_out, gh, gw) != (spec.out_channels(), oh, ow) {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d_backward_input",
            lhs: grad_out.shape().to_vec(),
            rhs: vec![spec.out_channels(), oh, ow],
        });
    }
    let c_in = spec.in_channels();
    let (kh, kw) = spec.kernel_size();
    let k = spec.kernel.data();
    let g = grad_out.data();
    let mut grad = vec![0.0; c_in * h * w];
    for o in 0..c_out {
        for ci in 0..c_in {
            for ky in 0..kh {
                for kx in 0..kw {
                    let wt = k[((o * c_in + ci) * kh + ky) * kw + kx];
                    for oy in 0..oh {
                        let Some(iy) = source(oy, ky, spec, h) else {
                            continue;
                        };
                        for ox in 0..ow {
                            if let Some(ix) = source(ox, kx, spec, w) {
                                grad[(ci * h + iy) * w + ix] += wt * g[(o * oh + oy) * ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![c_in, h, w], grad))
}
