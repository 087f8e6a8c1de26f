use std::io::Write;

use serde::Serialize;
use sodbench_core::kernels::{deda_gradient, depth_enhanced_saliency_attention, AttentionMap, DepthMap};
use sodbench_core::tensor::{conv2d, conv2d_backward_input, finite_diff_grad, sigmoid, softmax_rows};
use sodbench_core::{ConvSpec, Tensor};

use crate::cli::{Format, GradcheckArgs};
use crate::synth::{open_unit, rng, uniform};
use crate::{Cli, CliError, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Largest per-entry relative error `|a − n| / max(|a|, |n|)`; entries that
/// are both zero count as exact.
pub fn entrywise_rel_err(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| {
            let scale = a.abs().max(n.abs());
            if scale == 0.0 { 0.0 } else { (a - n).abs() / scale }
        })
        .fold(0.0, f64::max)
}

/// Largest entry difference relative to the largest gradient magnitude.
pub fn scaled_rel_err(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let max_abs = |t: &Tensor| t.data().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let scale = max_abs(analytic).max(max_abs(numeric));
    let diff = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .fold(0.0, |m: f64, (a, n)| m.max((a - n).abs()));
    if scale == 0.0 { 0.0 } else { diff / scale }
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

struct Setup {
    eps: f64,
    zero: bool,
    size: usize,
}

impl Setup {
    fn tensor(&self, r: &mut rand_chacha::ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        if self.zero { Tensor::zeros(shape.to_vec()).unwrap() } else { uniform(r, shape, lo, hi) }
    }
}

fn deda_instance(s: &Setup, r: &mut rand_chacha::ChaCha8Rng) -> Result<f64, CliError> {
    let shape = [1, s.size, s.size];
    let a = if s.zero { Tensor::zeros(shape)? } else { open_unit(r, &shape) };
    let d = DepthMap::new(s.tensor(r, &shape, 0.0, 1.0))?;
    let analytic = deda_gradient(&AttentionMap::new(a.clone()), &d)?;
    let numeric = finite_diff_grad(
        |t| {
            depth_enhanced_saliency_attention(&AttentionMap::new(t.clone()), &d)
                .map(|m| m.tensor().sum())
                .unwrap_or(f64::NAN)
        },
        &a,
        s.eps,
    )?;
    Ok(entrywise_rel_err(&analytic, &numeric))
}

fn conv_instance(s: &Setup, r: &mut rand_chacha::ChaCha8Rng) -> Result<f64, CliError> {
    let n = s.size;
    let x = s.tensor(r, &[2, n, n], -1.0, 1.0);
    let spec = ConvSpec::same(s.tensor(r, &[3, 2, 3, 3], -1.0, 1.0), Tensor::zeros([3])?, 1)?;
    let g = s.tensor(r, &[3, n, n], -1.0, 1.0);
    let analytic = conv2d_backward_input(&g, &spec, (n, n))?;
    let numeric = finite_diff_grad(|t| conv2d(t, &spec).map(|y| dot(&y, &g)).unwrap_or(f64::NAN), &x, s.eps)?;
    Ok(scaled_rel_err(&analytic, &numeric))
}

fn sigmoid_instance(s: &Setup, r: &mut rand_chacha::ChaCha8Rng) -> Result<f64, CliError> {
    let shape = [1, s.size, s.size];
    let x = s.tensor(r, &shape, -4.0, 4.0);
    let g = s.tensor(r, &shape, -1.0, 1.0);
    let sx = sigmoid(&x);
    let analytic = sx.zip_with(&g, "sigmoid grad", |v, gv| v * (1.0 - v) * gv)?;
    let numeric = finite_diff_grad(|t| dot(&sigmoid(t), &g), &x, s.eps)?;
    Ok(scaled_rel_err(&analytic, &numeric))
}

fn softmax_instance(s: &Setup, r: &mut rand_chacha::ChaCha8Rng) -> Result<f64, CliError> {
    let n = s.size;
    let x = s.tensor(r, &[n, n], -3.0, 3.0);
    let g = s.tensor(r, &[n, n], -1.0, 1.0);
    let sm = softmax_rows(&x)?;
    let analytic = Tensor::from_fn([n, n], |i| {
        let row = i / n;
        let inner: f64 = (0..n).map(|j| sm.data()[row * n + j] * g.data()[row * n + j]).sum();
        sm.data()[i] * (g.data()[i] - inner)
    })?;
    let numeric = finite_diff_grad(|t| softmax_rows(t).map(|y| dot(&y, &g)).unwrap_or(f64::NAN), &x, s.eps)?;
    Ok(scaled_rel_err(&analytic, &numeric))
}

type Instance = fn(&Setup, &mut rand_chacha::ChaCha8Rng) -> Result<f64, CliError>;

/// Runs every gradient check on `instances` seeded inputs of side `size`.
pub fn run_checks(
    eps: f64,
    zero: bool,
    instances: usize,
    size: usize,
    tolerance: f64,
    seed: u64,
) -> Result<Vec<CheckResult>, CliError> {
    if instances == 0 || size == 0 {
        return Err(CliError::Usage("instances and size must be positive".into()));
    }
    let setup = Setup { eps, zero, size };
    let checks: [(&'static str, Instance); 4] = [
        ("deda_gradient", deda_instance),
        ("conv2d_input", conv_instance),
        ("sigmoid", sigmoid_instance),
        ("softmax_rows", softmax_instance),
    ];
    let mut results = Vec::new();
    for (k, (name, f)) in checks.into_iter().enumerate() {
        let mut r = rng(seed.wrapping_add(k as u64));
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            worst = worst.max(f(&setup, &mut r)?);
        }
        results.push(CheckResult {
            check: name,
            instances,
            max_rel_err: worst,
            pass: worst <= tolerance,
        });
    }
    Ok(results)
}

pub fn run(args: &GradcheckArgs, cli: &Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    if !(args.eps > 0.0 && args.eps.is_finite()) {
        return Err(CliError::Usage(format!("--eps must be positive, got {}", args.eps)));
    }
    let results = run_checks(args.eps, args.zero, args.instances, args.size, args.tolerance, cli.seed)?;
    for r in &results {
        match cli.format {
            Format::Table => writeln!(
                out,
                "{} {:<14} max_rel_err={:.3e} instances={} eps={:e}",
                if r.pass { "PASS" } else { "FAIL" },
                r.check,
                r.max_rel_err,
                r.instances,
                args.eps
            )?,
            Format::Records => writeln!(out, "{}", serde_json::to_string(r)?)?,
        }
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.check).collect();
    if failed.is_empty() {
        Ok(Outcome::Success)
    } else {
        eprintln!(
            "gradient error above {:e} in: {} (step eps={:e})",
            args.tolerance,
            failed.join(", "),
            args.eps
        );
        Ok(Outcome::CheckFailed)
    }
}
