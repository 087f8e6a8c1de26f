use super::{shape_err, AttentionMap, KernelError, Result};
use crate::tensor::{conv2d, global_avg_pool, he_init, matmul, softmax_rows, ConvSpec, Tensor};

fn ensure_pointwise_square(op: &'static str, conv: &ConvSpec, channels: usize) -> Result<()> {
    if conv.kernel_size() != (1, 1) || conv.in_channels() != channels || conv.out_channels() != channels {
        return Err(shape_err(
            op,
            format!(
                "need a 1x1 {channels}->{channels} conv, got {:?}",
                conv.kernel().shape()
            ),
        ));
    }
    Ok(())
}

/// Pairwise position attention `softmax(Qᵀ·Q)` where `Q` is the `(C, N)`
/// reshape of a 1×1 projection of the input and `N = H·W`. Each row (one
/// query position) is a distribution over all key positions.
pub fn pafe_attention(f_in: &Tensor, conv: &ConvSpec) -> Result<AttentionMap> {
    let (c, h, w) = f_in.dims3("pafe_attention")?;
    ensure_pointwise_square("pafe_attention", conv, c)?;
    let q = conv2d(f_in, conv)?.reshape([c, h * w])?;
    let logits = matmul(&q.transpose()?, &q)?;
    Ok(AttentionMap::new(softmax_rows(&logits)?))
}

/// Attention-refined branch: `F_out = F_in + R2(V × Aᵀ)` with `V` the `(C, N)`
/// reshape of the value projection and `A` from [`pafe_attention`].
pub fn pafe_branch(f_in: &Tensor, conv_att: &ConvSpec, conv_val: &ConvSpec) -> Result<Tensor> {
    let (c, h, w) = f_in.dims3("pafe_branch")?;
    ensure_pointwise_square("pafe_branch", conv_val, c)?;
    let attention = pafe_attention(f_in, conv_att)?;
    let values = conv2d(f_in, conv_val)?.reshape([c, h * w])?;
    let attended = matmul(&values, &attention.tensor().transpose()?)?.reshape([c, h, w])?;
    Ok(f_in.add(&attended)?)
}

/// One dilated branch: a 3×3 dilated convolution followed by its attention
/// and value projections.
#[derive(Debug, Clone, PartialEq)]
pub struct PafeBranch {
    pub conv: ConvSpec,
    pub attention: ConvSpec,
    pub value: ConvSpec,
}

/// Five-branch pyramid: a 1×1 convolution, one attended dilated branch per
/// rate, and global average pooling, concatenated in that order and fused
/// by a 1×1 convolution. The 1×1 and pooling branches carry no attention.
#[derive(Debug, Clone, PartialEq)]
pub struct PafeConfig {
    pub dilation_rates: Vec<usize>,
    pub pointwise: ConvSpec,
    pub branches: Vec<PafeBranch>,
    pub fuse: ConvSpec,
    /// Reuse each branch's attention projection as its value projection.
    pub tie_value_to_attention: bool,
}

pub const DEFAULT_DILATION_RATES: [usize; 3] = [2, 4, 6];

impl PafeConfig {
    /// He-initialised weights (zero biases) for an input with `in_channels`,
    /// `branch_channels` per branch, and `out_channels` after fusion.
    pub fn he_initialized(
        in_channels: usize,
        branch_channels: usize,
        out_channels: usize,
        dilation_rates: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let mut next_seed = seed;
        let mut conv = |out: usize, inp: usize, k: usize, dilation: usize| -> Result<ConvSpec> {
            next_seed = next_seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
            Ok(ConvSpec::same(
                he_init([out, inp, k, k], next_seed)?,
                Tensor::zeros([out])?,
                dilation,
            )?)
        };
        let pointwise = conv(branch_channels, in_channels, 1, 1)?;
        let branches = dilation_rates
            .iter()
            .map(|&rate| {
                Ok(PafeBranch {
                    conv: conv(branch_channels, in_channels, 3, rate)?,
                    attention: conv(branch_channels, branch_channels, 1, 1)?,
                    value: conv(branch_channels, branch_channels, 1, 1)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let concat = branch_channels * (1 + dilation_rates.len()) + in_channels;
        let fuse = conv(out_channels, concat, 1, 1)?;
        Ok(Self {
            dilation_rates: dilation_rates.to_vec(),
            pointwise,
            branches,
            fuse,
            tie_value_to_attention: false,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.pointwise.in_channels()
    }

    pub fn branch_channels(&self) -> usize {
        self.pointwise.out_channels()
    }

    pub fn concat_channels(&self) -> usize {
        self.branch_channels() * (1 + self.branches.len()) + self.in_channels()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(KernelError::Config(m));
        let (c, b) = (self.in_channels(), self.branch_channels());
        if self.pointwise.kernel_size() != (1, 1) {
            return cfg_err("pointwise branch must be 1x1".into());
        }
        if self.dilation_rates.len() != self.branches.len() {
            return cfg_err(format!(
                "{} dilation rates but {} branches",
                self.dilation_rates.len(),
                self.branches.len()
            ));
        }
        for (k, (branch, &rate)) in self.branches.iter().zip(&self.dilation_rates).enumerate() {
            let conv = &branch.conv;
            if conv.kernel_size() != (3, 3) || conv.dilation != rate || conv.stride != 1 || conv.padding != rate {
                return cfg_err(format!(
                    "branch {k}: need a same-padded 3x3 conv with dilation {rate}"
                ));
            }
            if conv.in_channels() != c || conv.out_channels() != b {
                return cfg_err(format!("branch {k}: conv must map {c} -> {b} channels"));
            }
            let value = if self.tie_value_to_attention { &branch.attention } else { &branch.value };
            for p in [&branch.attention, value] {
                if p.kernel_size() != (1, 1) || p.in_channels() != b || p.out_channels() != b {
                    return cfg_err(format!("branch {k}: projections must be 1x1 {b} -> {b}"));
                }
            }
        }
        if self.fuse.kernel_size() != (1, 1) || self.fuse.in_channels() != self.concat_channels() {
            return cfg_err(format!(
                "fuse conv must be 1x1 over {} concatenated channels",
                self.concat_channels()
            ));
        }
        Ok(())
    }
}

/// Every intermediate of one [`pafe_module`] pass.
#[derive(Debug, Clone)]
pub struct PafeOutput {
    pub pointwise: Tensor,
    /// Attended output of each dilated branch, in rate order.
    pub attended: Vec<Tensor>,
    /// Pooled channel means replicated back to `H × W`.
    pub pooled: Tensor,
    pub concatenated: Tensor,
    pub fused: Tensor,
}

pub fn pafe_module(f_top: &Tensor, cfg: &PafeConfig) -> Result<PafeOutput> {
    cfg.validate()?;
    let (c, h, w) = f_top.dims3("pafe_module")?;
    if c != cfg.in_channels() {
        return Err(shape_err(
            "pafe_module",
            format!("input has {c} channels, config expects {}", cfg.in_channels()),
        ));
    }
    let pointwise = conv2d(f_top, &cfg.pointwise)?;
    let attended = cfg
        .branches
        .iter()
        .map(|branch| {
            let dilated = conv2d(f_top, &branch.conv)?;
            let value = if cfg.tie_value_to_attention { &branch.attention } else { &branch.value };
            pafe_branch(&dilated, &branch.attention, value)
        })
        .collect::<Result<Vec<_>>>()?;
    let means = global_avg_pool(f_top)?;
    let pooled = Tensor::from_fn([c, h, w], |i| means.data()[i / (h * w)])?;

    let mut parts: Vec<&Tensor> = vec![&pointwise];
    parts.extend(attended.iter());
    parts.push(&pooled);
    let concatenated = Tensor::concat_channels(&parts)?;
    let fused = conv2d(&concatenated, &cfg.fuse)?;
    Ok(PafeOutput {
        pointwise,
        attended,
        pooled,
        concatenated,
        fused,
    })
}
