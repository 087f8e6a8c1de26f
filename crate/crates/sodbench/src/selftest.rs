use std::io::Write;

use serde::Serialize;
use sodbench_core::kernels::{
    depth_enhanced_background_attention, depth_enhanced_saliency_attention, early_fusion_first_layer, pafe_attention,
    pafe_branch, poly_lr, AttentionMap, DepthMap, FusionVariant, KernelError, POLY_POWER,
};
use sodbench_core::metrics::{
    e_measure, evaluate_dataset, f_max, f_mean, f_weighted, mae, pr_curve, reference, s_measure, threshold_counts,
    EvalConfig, EvalPair, SaliencyMap,
};
use sodbench_core::tensor::conv2d;
use sodbench_core::{ConvSpec, Tensor};

use crate::cli::{Format, SelftestArgs};
use crate::synth::{open_unit, random_mask, random_pair, rng, uniform};
use crate::{Cli, CliError, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheck {
    pub check: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn kerr(e: KernelError) -> String {
    e.to_string()
}

fn metric_counts(seed: u64) -> Check {
    let mut r = rng(seed);
    for i in 0..200 {
        let (p, g) = random_pair(&mut r, 16, 16);
        let fast = threshold_counts(&p, &g).map_err(|e| e.to_string())?;
        ensure(fast == reference::threshold_counts(&p, &g), || format!("pair {i}: counts differ"))?;
        if g.foreground_count() == 0 {
            continue;
        }
        let curve = pr_curve(&p, &g).map_err(|e| e.to_string())?;
        for (t, c) in fast.iter().enumerate() {
            let ok = (curve.precision[t] - c.precision()).abs() <= 1e-12 && (curve.recall[t] - c.recall()).abs() <= 1e-12;
            ensure(ok, || format!("pair {i}, threshold {t}: ratio mismatch"))?;
        }
    }
    Ok("200 pairs of 16x16".into())
}

fn metric_dense(seed: u64) -> Check {
    let cfg = EvalConfig::default();
    let mut r = rng(seed);
    let mut worst = [0.0f64; 4];
    for i in 0..200 {
        let (p, g) = random_pair(&mut r, 16, 16);
        let e = |x: Result<f64, _>| x.map_err(|e: sodbench_core::metrics::MetricError| e.to_string());
        let diffs = [
            (e(mae(&p, &g))? - reference::mae(&p, &g)).abs(),
            (e(e_measure(&p, &g, &cfg))? - reference::e_measure(&p, &g, cfg.adaptive_rule)).abs(),
            (e(s_measure(&p, &g, &cfg))? - reference::s_measure(&p, &g, cfg.alpha)).abs(),
            if g.foreground_count() > 0 {
                (e(f_weighted(&p, &g, &cfg))? - reference::f_weighted(&p, &g, cfg.wf_gauss_size, cfg.wf_gauss_sigma)).abs()
            } else {
                0.0
            },
        ];
        for (w, d) in worst.iter_mut().zip(diffs) {
            *w = w.max(d);
        }
        ensure(diffs[0] <= 1e-12 && diffs[1] <= 1e-9 && diffs[2] <= 1e-9 && diffs[3] <= 1e-9, || {
            format!("pair {i}: differences {diffs:?}")
        })?;
    }
    Ok(format!(
        "max |diff| mae={:.1e} e={:.1e} s={:.1e} fw={:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn perfect_prediction(seed: u64) -> Check {
    let cfg = EvalConfig::default();
    let mut r = rng(seed);
    for i in 0..50 {
        let g = random_mask(&mut r, 16, 16);
        let p = SaliencyMap::new(g.tensor().clone()).map_err(|e| e.to_string())?;
        let curve = pr_curve(&p, &g).map_err(|e| e.to_string())?;
        let values = [
            mae(&p, &g).map_err(|e| e.to_string())?,
            1.0 - f_max(&curve, &cfg),
            1.0 - f_mean(&p, &g, &cfg).map_err(|e| e.to_string())?,
            1.0 - f_weighted(&p, &g, &cfg).map_err(|e| e.to_string())?,
            1.0 - s_measure(&p, &g, &cfg).map_err(|e| e.to_string())?,
            1.0 - e_measure(&p, &g, &cfg).map_err(|e| e.to_string())?,
        ];
        ensure(values.iter().all(|v| v.abs() <= 1e-9), || format!("mask {i}: deviations {values:?}"))?;
    }
    Ok("50 masks".into())
}

/// Background attention with the sign of its depth term flipped.
fn faulty_background(a_m: &AttentionMap, d: &DepthMap) -> Result<AttentionMap, KernelError> {
    let t = a_m.tensor().zip_with(d.tensor(), "faulty", |a, d| {
        let c = 1.0 - a;
        c * c - c * d
    })?;
    Ok(AttentionMap::new(t))
}

type Background = fn(&AttentionMap, &DepthMap) -> Result<AttentionMap, KernelError>;

fn deda_symmetry(seed: u64, background: Background) -> Check {
    let mut r = rng(seed);
    for i in 0..1000 {
        let a = open_unit(&mut r, &[1, 4, 4]);
        let d = DepthMap::new(uniform(&mut r, &[1, 4, 4], 0.0, 1.0)).map_err(kerr)?;
        let bd = background(&AttentionMap::new(a.clone()), &d).map_err(kerr)?;
        let flipped = AttentionMap::new(a.map(|v| 1.0 - v));
        let sd = depth_enhanced_saliency_attention(&flipped, &d).map_err(kerr)?;
        let same = bd.tensor().data().iter().zip(sd.tensor().data()).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(same, || format!("instance {i}: A_bd(a, d) != A_sd(1 - a, d)"))?;
    }
    Ok("1000 instances, bitwise".into())
}

fn deda_zero_depth(seed: u64) -> Check {
    let mut r = rng(seed);
    let a = AttentionMap::new(open_unit(&mut r, &[1, 6, 6]));
    let d = DepthMap::zeros(6, 6).map_err(kerr)?;
    let sd = depth_enhanced_saliency_attention(&a, &d).map_err(kerr)?;
    let bd = depth_enhanced_background_attention(&a, &d).map_err(kerr)?;
    for ((&v, &s), &b) in a.tensor().data().iter().zip(sd.tensor().data()).zip(bd.tensor().data()) {
        ensure(s == v * v && b == (1.0 - v) * (1.0 - v), || format!("a = {v}: got {s}, {b}"))?;
    }
    Ok("36 entries".into())
}

fn pointwise(r: &mut rand_chacha::ChaCha8Rng, c: usize) -> Result<ConvSpec, String> {
    ConvSpec::pointwise(uniform(r, &[c, c], -1.0, 1.0), Tensor::zeros([c]).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())
}

fn softmax_normalization(seed: u64) -> Check {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for c in 1..=8 {
        for (h, w) in [(1, 1), (2, 3), (6, 6)] {
            let f = uniform(&mut r, &[c, h, w], -2.0, 2.0);
            let a = pafe_attention(&f, &pointwise(&mut r, c)?).map_err(kerr)?;
            let n = h * w;
            for row in a.tensor().data().chunks(n) {
                worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("row sum off by {worst:e}"))?;
    Ok(format!("max |row sum - 1| = {worst:.1e}"))
}

fn pafe_zero_value(seed: u64) -> Check {
    let mut r = rng(seed);
    for c in [1, 3, 8] {
        let f = uniform(&mut r, &[c, 5, 4], -1.0, 1.0);
        let zero = ConvSpec::zeros(c, c, 1, 1).map_err(|e| e.to_string())?;
        let out = pafe_branch(&f, &pointwise(&mut r, c)?, &zero).map_err(kerr)?;
        ensure(out == f, || format!("{c} channels: output differs from input"))?;
    }
    Ok("exact".into())
}

fn poly_boundaries() -> Check {
    let (base, max) = (0.01, 1000u64);
    let lr = |i| poly_lr(base, i, max, POLY_POWER).map_err(kerr);
    ensure(lr(0)? == base, || "lr(0) != base".into())?;
    ensure(lr(max)? == 0.0, || "lr(max) != 0".into())?;
    let mut prev = lr(0)?;
    for i in 1..=max {
        let v = lr(i)?;
        ensure(v < prev, || format!("not decreasing at {i}"))?;
        prev = v;
    }
    ensure(poly_lr(base, max + 1, max, POLY_POWER).is_err(), || "iter > max accepted".into())?;
    Ok(format!("{max} steps"))
}

fn cat_he_zeroed(seed: u64) -> Check {
    let mut r = rng(seed);
    let rgb = uniform(&mut r, &[3, 7, 6], 0.0, 1.0);
    let d = DepthMap::new(uniform(&mut r, &[1, 7, 6], 0.0, 1.0)).map_err(kerr)?;
    let v = FusionVariant::cat_he(seed).and_then(|v| v.with_zeroed_depth_column()).map_err(kerr)?;
    let fused = early_fusion_first_layer(&rgb, &d, &v).map_err(kerr)?;
    let rgb_only = conv2d(&rgb, &v.rgb_columns().map_err(kerr)?).map_err(|e| e.to_string())?;
    ensure(fused.data() == rgb_only.data(), || "outputs differ".into())?;
    Ok("bitwise".into())
}

fn report_determinism(seed: u64, workers: usize) -> Check {
    let cfg = EvalConfig::default();
    let mut r = rng(seed);
    let pairs: Vec<EvalPair> = (0..12)
        .map(|i| {
            let (pred, gt) = random_pair(&mut r, 20, 20);
            EvalPair {
                stem: format!("s{:02}", (i * 7) % 12),
                pred,
                gt,
            }
        })
        .collect();
    let one = evaluate_dataset(&pairs, &cfg, 1).map_err(|e| e.to_string())?;
    let many = evaluate_dataset(&pairs, &cfg, workers.max(2)).map_err(|e| e.to_string())?;
    let again = evaluate_dataset(&pairs, &cfg, 1).map_err(|e| e.to_string())?;
    ensure(one == many && one == again, || "reports differ".into())?;
    Ok("12 pairs".into())
}

/// Runs every self-check. `inject_fault` swaps in a background attention with
/// a flipped depth term.
pub fn run_checks(seed: u64, workers: usize, inject_fault: bool) -> Vec<SelfCheck> {
    let background: Background = if inject_fault { faulty_background } else { depth_enhanced_background_attention };
    let checks: Vec<(&'static str, Box<dyn Fn() -> Check>)> = vec![
        ("metric_counts_brute_force", Box::new(move || metric_counts(seed))),
        ("metric_dense_oracles", Box::new(move || metric_dense(seed + 1))),
        ("perfect_prediction", Box::new(move || perfect_prediction(seed + 2))),
        ("deda_symmetry", Box::new(move || deda_symmetry(seed + 3, background))),
        ("deda_zero_depth", Box::new(move || deda_zero_depth(seed + 4))),
        ("softmax_normalization", Box::new(move || softmax_normalization(seed + 5))),
        ("pafe_zero_value_identity", Box::new(move || pafe_zero_value(seed + 6))),
        ("poly_lr_boundaries", Box::new(poly_boundaries)),
        ("cat_he_zeroed_depth", Box::new(move || cat_he_zeroed(seed + 7))),
        ("report_determinism", Box::new(move || report_determinism(seed + 8, workers))),
    ];
    checks
        .into_iter()
        .map(|(check, f)| match f() {
            Ok(detail) => SelfCheck { check, pass: true, detail },
            Err(detail) => SelfCheck { check, pass: false, detail },
        })
        .collect()
}

pub fn run(args: &SelftestArgs, cli: &Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let results = run_checks(cli.seed, cli.workers, args.inject_fault);
    for r in &results {
        match cli.format {
            Format::Table => writeln!(out, "{} {:<26} {}", if r.pass { "PASS" } else { "FAIL" }, r.check, r.detail)?,
            Format::Records => writeln!(out, "{}", serde_json::to_string(r)?)?,
        }
    }
    Ok(if results.iter().all(|r| r.pass) { Outcome::Success } else { Outcome::CheckFailed })
}
