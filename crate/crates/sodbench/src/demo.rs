use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sodbench_core::io::{load_gray_map, normalize_depth, save_gray_map, MapKind};
use sodbench_core::kernels::{
    depth_enhanced_background_attention, depth_enhanced_saliency_attention, mask_guided_attention, pafe_module,
    DepthMap, FusionVariant, PafeConfig, WeightBundle, DEFAULT_DILATION_RATES,
};
use sodbench_core::tensor::{conv2d, save_tensor};
use sodbench_core::{ConvSpec, Tensor};

use crate::cli::{DemoArgs, Format};
use crate::synth::{disk_depth, rng, uniform};
use crate::{create_dir, write_file, Cli, CliError, Outcome};

pub const SCALES_FILE: &str = "scales.json";
pub const WEIGHTS_DIR: &str = "weights";

#[derive(Debug, Serialize)]
struct Scale {
    min: f64,
    max: f64,
    /// Multi-channel tensors are rastered as their per-pixel channel mean.
    channel_mean: bool,
}

/// 3×3 convolution averaging all `channels` inputs into one map.
pub fn averaging_conv(channels: usize) -> Result<ConvSpec, CliError> {
    let k = Tensor::full([1, channels, 3, 3], 1.0 / (9 * channels) as f64)?;
    Ok(ConvSpec::same(k, Tensor::zeros([1])?, 1)?)
}

fn channel_mean(t: &Tensor) -> Result<Tensor, CliError> {
    let (c, h, w) = t.dims3("channel_mean")?;
    let d = t.data();
    Ok(Tensor::from_fn([1, h, w], |i| (0..c).map(|k| d[k * h * w + i]).sum::<f64>() / c as f64)?)
}

struct Dumper<'a> {
    dir: &'a Path,
    scales: BTreeMap<String, Scale>,
}

impl Dumper<'_> {
    /// Writes `name.sodt` and a min-max scaled `name.png`.
    fn dump(&mut self, name: &str, t: &Tensor) -> Result<(), CliError> {
        save_tensor(self.dir.join(format!("{name}.sodt")), t)?;
        let multi = t.shape()[0] != 1;
        let map = if multi { channel_mean(t)? } else { t.clone() };
        let (lo, hi) = (map.min(), map.max());
        let scaled = if hi > lo { map.map(|v| (v - lo) / (hi - lo)) } else { map.map(|_| 0.0) };
        save_gray_map(self.dir.join(format!("{name}.png")), &scaled)?;
        self.scales.insert(
            name.to_string(),
            Scale {
                min: lo,
                max: hi,
                channel_mean: multi,
            },
        );
        Ok(())
    }
}

fn region_means(values: &Tensor, depth: &Tensor) -> (f64, f64) {
    let (mut inside, mut ni, mut outside, mut no) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &d) in values.data().iter().zip(depth.data()) {
        if d > 0.5 {
            inside += v;
            ni += 1;
        } else {
            outside += v;
            no += 1;
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { f64::NAN } else { s / n as f64 };
    (mean(inside, ni), mean(outside, no))
}

#[derive(Serialize)]
struct Summary<'a> {
    map: &'a str,
    min: f64,
    max: f64,
}

pub fn run(args: &DemoArgs, cli: &Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let (n, c) = (args.size, args.channels);
    if n == 0 || c == 0 || args.pafe_size == 0 {
        return Err(CliError::Usage("--size, --channels and --pafe-size must be positive".into()));
    }
    create_dir(&args.out)?;
    let mut dumper = Dumper {
        dir: &args.out,
        scales: BTreeMap::new(),
    };

    let depth = if let Some(path) = &args.depth {
        normalize_depth(&load_gray_map(path, MapKind::Depth)?)?
    } else if args.zero_depth {
        DepthMap::zeros(n, n)?
    } else {
        DepthMap::new(disk_depth(n, n))?
    };
    let depth_at = depth.resized(n, n)?;

    let transition = Tensor::zeros([c, n, n])?;
    let mask_conv = averaging_conv(c)?;
    let a_m = mask_guided_attention(&transition, None, &depth, &mask_conv)?;
    let a_sd = depth_enhanced_saliency_attention(&a_m, &depth_at)?;
    let a_bd = depth_enhanced_background_attention(&a_m, &depth_at)?;
    dumper.dump("depth", depth_at.tensor())?;
    dumper.dump("a_m", a_m.tensor())?;
    dumper.dump("a_sd", a_sd.tensor())?;
    dumper.dump("a_bd", a_bd.tensor())?;

    let p = args.pafe_size;
    let mut r = rng(cli.seed);
    let f_top = uniform(&mut r, &[c, p, p], -1.0, 1.0);
    let pafe = PafeConfig::he_initialized(c, c, c, &DEFAULT_DILATION_RATES, cli.seed)?;
    let result = pafe_module(&f_top, &pafe)?;
    dumper.dump("pafe_input", &f_top)?;
    dumper.dump("pafe_pointwise", &result.pointwise)?;
    for (k, (branch, attended)) in pafe.branches.iter().zip(&result.attended).enumerate() {
        dumper.dump(&format!("pafe_branch_{}_input", k + 1), &conv2d(&f_top, &branch.conv)?)?;
        dumper.dump(&format!("pafe_branch_{}", k + 1), attended)?;
    }
    dumper.dump("pafe_pooled", &result.pooled)?;
    dumper.dump("pafe_fused", &result.fused)?;

    let mut bundle = WeightBundle::new();
    bundle.insert(WeightBundle::mask_conv_role(1), mask_conv);
    bundle.insert_pafe(&pafe);
    let fusion = FusionVariant::cat_he(cli.seed)?;
    bundle.insert(WeightBundle::first_layer_role(fusion.tag()), fusion.first_layer().clone());
    bundle.save(args.out.join(WEIGHTS_DIR))?;

    let mut json = serde_json::to_string_pretty(&dumper.scales)?;
    json.push('\n');
    write_file(&args.out.join(SCALES_FILE), json.as_bytes())?;

    let (inside, outside) = region_means(a_sd.tensor(), depth_at.tensor());
    match cli.format {
        Format::Table => {
            for (name, s) in &dumper.scales {
                writeln!(out, "{name:<20} min={:<12.6} max={:.6}", s.min, s.max)?;
            }
            writeln!(out, "a_sd mean where depth > 0.5: {inside:.6}; elsewhere: {outside:.6}")?;
        }
        Format::Records => {
            for (name, s) in &dumper.scales {
                let line = Summary { map: name, min: s.min, max: s.max };
                writeln!(out, "{}", serde_json::to_string(&line)?)?;
            }
        }
    }
    Ok(Outcome::Success)
}
