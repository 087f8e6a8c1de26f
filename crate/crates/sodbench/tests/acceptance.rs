//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sodbench_core::io::{pair_files, write_synthetic_dataset, PairEntry};
use sodbench_core::kernels::{
    deda_gradient, depth_enhanced_background_attention, depth_enhanced_saliency_attention, early_fusion_first_layer,
    pafe_attention, pafe_branch, poly_lr, AttentionMap, DepthMap, FusionVariant, POLY_POWER,
};
use sodbench_core::metrics::{
    e_measure, evaluate_dataset_with, f_beta, f_max, f_mean, f_weighted, mae, pr_curve, s_measure,
    s_measure_components, threshold_counts, EvalConfig, GroundTruthMask, SaliencyMap,
};
use sodbench_core::tensor::{conv2d, he_std};
use sodbench_core::{ConvSpec, Tensor};
use support::oracle::{self, Pair};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(lo..hi)).unwrap()
}

/// Random values in the open interval (0, 1).
fn open_unit(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            break v;
        }
    })
    .unwrap()
}

/// Ellipse-shaped mask with random noise pixels, holding both classes.
fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Vec<bool> {
    loop {
        let (cy, cx) = (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64));
        let (ry, rx) = (rng.random_range(1.0..h as f64 / 2.0 + 1.0), rng.random_range(1.0..w as f64 / 2.0 + 1.0));
        let flip = rng.random_range(0.0..0.1);
        let mask: Vec<bool> = (0..h * w)
            .map(|i| {
                let (y, x) = ((i / w) as f64, (i % w) as f64);
                let inside = ((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2) <= 1.0;
                inside ^ (rng.random::<f64>() < flip)
            })
            .collect();
        let fg = mask.iter().filter(|&&b| b).count();
        if fg > 0 && fg < h * w {
            break mask;
        }
    }
}

/// Prediction correlated with the mask, with exact 0 and 1 values mixed in.
fn random_prediction(rng: &mut ChaCha8Rng, mask: &[bool]) -> Vec<f64> {
    let bias = rng.random_range(0.0..0.8);
    mask.iter()
        .map(|&g| match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => {
                let base: f64 = rng.random();
                if g { (base + bias).min(1.0) } else { base * (1.0 - bias) }
            }
        })
        .collect()
}

fn to_maps(h: usize, w: usize, pred: &[f64], gt: &[bool]) -> (SaliencyMap, GroundTruthMask) {
    let p = SaliencyMap::new(Tensor::new([1, h, w], pred.to_vec()).unwrap()).unwrap();
    let g = GroundTruthMask::new(Tensor::new([1, h, w], gt.iter().map(|&b| b as u8 as f64).collect()).unwrap()).unwrap();
    (p, g)
}

fn central_difference(a: &[f64], d: &[f64], eps: f64) -> Vec<f64> {
    let sd = |a: &[f64]| -> f64 { a.iter().zip(d).map(|(a, d)| a * a + a * d).sum() };
    let mut grad = Vec::with_capacity(a.len());
    let mut x = a.to_vec();
    for i in 0..a.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let up = sd(&x);
        x[i] = orig - eps;
        let down = sd(&x);
        x[i] = orig;
        grad.push((up - down) / (2.0 * eps));
    }
    grad
}

fn c1_deda_gradient() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = open_unit(&mut rng, &[1, 8, 8]);
        let d = uniform(&mut rng, &[1, 8, 8], 0.0, 1.0);
        let analytic = deda_gradient(&AttentionMap::new(a.clone()), &DepthMap::new(d.clone()).unwrap()).unwrap();
        let numeric = central_difference(a.data(), d.data(), 1e-5);
        for (x, y) in analytic.data().iter().zip(&numeric) {
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()));
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-5, || format!("max relative error {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("max relative error {worst:.2e} over 100 instances in {elapsed:.2?}"))
}

fn c2_deda_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for k in 0..1000 {
        let (h, w) = (rng.random_range(1..10), rng.random_range(1..10));
        let a = open_unit(&mut rng, &[1, h, w]);
        let d = DepthMap::new(uniform(&mut rng, &[1, h, w], 0.0, 1.0)).unwrap();
        let bd = depth_enhanced_background_attention(&AttentionMap::new(a.clone()), &d).unwrap();
        let sd = depth_enhanced_saliency_attention(&AttentionMap::new(a.map(|v| 1.0 - v)), &d).unwrap();
        let same = bd.tensor().data().iter().zip(sd.tensor().data()).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(same, || format!("instance {k} differs"))?;
    }
    Ok("1000 instances bitwise equal".into())
}

fn pointwise(rng: &mut ChaCha8Rng, c: usize) -> ConvSpec {
    ConvSpec::same(uniform(rng, &[c, c, 1, 1], -1.0, 1.0), uniform(rng, &[c], -0.5, 0.5), 1).unwrap()
}

fn c3_attention_rows() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    let mut shapes = 0;
    for c in 1..=8 {
        for h in 1..=6 {
            for w in 1..=6 {
                let f = uniform(&mut rng, &[c, h, w], -2.0, 2.0);
                let att = pafe_attention(&f, &pointwise(&mut rng, c)).unwrap();
                let n = h * w;
                ensure(att.tensor().shape() == [n, n], || format!("shape {:?}", att.tensor().shape()))?;
                for row in att.tensor().data().chunks(n) {
                    worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
                }
                shapes += 1;
            }
        }
    }
    ensure(worst <= 1e-12, || format!("row sum off by {worst:e}"))?;
    Ok(format!("{shapes} shapes up to (8,6,6), max row-sum error {worst:.1e}"))
}

fn c4_branch_reductions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for c in 1..=8 {
        let f = uniform(&mut rng, &[c, 1, 1], -2.0, 2.0);
        let (att, val) = (pointwise(&mut rng, c), pointwise(&mut rng, c));
        let out = pafe_branch(&f, &att, &val).unwrap();
        let v = conv2d(&f, &val).unwrap();
        for i in 0..c {
            worst = worst.max((out.data()[i] - (f.data()[i] + v.data()[i])).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("single position differs by {worst:e}"))?;
    for (c, h, w) in [(1, 1, 1), (3, 4, 5), (8, 6, 6)] {
        let f = uniform(&mut rng, &[c, h, w], -2.0, 2.0);
        let zero = ConvSpec::zeros(c, c, 1, 1).unwrap();
        let out = pafe_branch(&f, &pointwise(&mut rng, c), &zero).unwrap();
        ensure(out == f, || format!("zero value conv changed ({c},{h},{w})"))?;
    }
    Ok(format!("single position max error {worst:.1e}; zero value conv is the identity"))
}

fn c5_metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cfg = EvalConfig::default();
    let (mut ratio_err, mut s_err, mut e_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (h, w) = (16, 16);
    for k in 0..200 {
        let gt = random_mask(&mut rng, h, w);
        let pred = random_prediction(&mut rng, &gt);
        let o = Pair { h, w, pred: &pred, gt: &gt };
        let (p, g) = to_maps(h, w, &pred, &gt);

        let counts = threshold_counts(&p, &g).unwrap();
        let curve = pr_curve(&p, &g).unwrap();
        for t in 0..=255u32 {
            let want = oracle::counts_at(&o, t);
            let got = counts[t as usize];
            ensure((got.tp, got.fp, got.fn_, got.tn) == (want.tp, want.fp, want.fn_, want.tn), || {
                format!("pair {k} threshold {t}: counts {got:?} vs {want:?}")
            })?;
            ratio_err = ratio_err
                .max((curve.precision[t as usize] - want.precision()).abs())
                .max((curve.recall[t as usize] - want.recall()).abs());
        }
        ratio_err = ratio_err
            .max((mae(&p, &g).unwrap() - oracle::mae(&o)).abs())
            .max((f_max(&curve, &cfg) - oracle::f_max(&o, cfg.beta_sq)).abs())
            .max((f_mean(&p, &g, &cfg).unwrap() - oracle::f_mean(&o, cfg.beta_sq)).abs())
            .max((f_weighted(&p, &g, &cfg).unwrap() - oracle::f_weighted(&o)).abs());
        s_err = s_err.max((s_measure(&p, &g, &cfg).unwrap() - oracle::s_measure(&o, cfg.alpha)).abs());
        e_err = e_err.max((e_measure(&p, &g, &cfg).unwrap() - oracle::e_measure(&o)).abs());
    }
    ensure(ratio_err <= 1e-12, || format!("MAE/PR/F error {ratio_err:e}"))?;
    ensure(s_err <= 1e-9, || format!("S-measure error {s_err:e}"))?;
    ensure(e_err <= 1e-9, || format!("E-measure error {e_err:e}"))?;
    Ok(format!(
        "200 pairs, counts exact; max error MAE/PR/F {ratio_err:.1e}, S {s_err:.1e}, E {e_err:.1e}"
    ))
}

fn c6_perfect_prediction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cfg = EvalConfig::default();
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let (h, w) = (rng.random_range(4..40), rng.random_range(4..40));
        let gt = random_mask(&mut rng, h, w);
        let values: Vec<f64> = gt.iter().map(|&b| b as u8 as f64).collect();
        let (p, g) = to_maps(h, w, &values, &gt);
        let m = mae(&p, &g).unwrap();
        let fx = f_max(&pr_curve(&p, &g).unwrap(), &cfg);
        let fm = f_mean(&p, &g, &cfg).unwrap();
        ensure(m == 0.0 && fx == 1.0 && fm == 1.0, || {
            format!("mask {k}: MAE {m}, F_max {fx}, F_mean {fm}")
        })?;
        for v in [
            f_weighted(&p, &g, &cfg).unwrap(),
            s_measure(&p, &g, &cfg).unwrap(),
            e_measure(&p, &g, &cfg).unwrap(),
        ] {
            worst = worst.max((v - 1.0).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("F_w/S/E off by {worst:e}"))?;
    Ok(format!("50 masks: MAE 0 and F_max = F_mean = 1 exactly; F_w, S, E within {worst:.1e}"))
}

fn c7_metric_constants() -> Outcome {
    let cfg = EvalConfig::default();
    ensure(cfg.beta_sq == 0.3 && cfg.alpha == 0.5, || format!("defaults beta_sq {} alpha {}", cfg.beta_sq, cfg.alpha))?;
    let expected = 1.3 * 0.5 / (0.3 * 0.5 + 1.0);
    let f = f_beta(0.5, 1.0, cfg.beta_sq);
    ensure((f - expected).abs() <= 1e-15 && (f - 0.565217).abs() < 1e-6, || format!("F = {f}"))?;

    // Both pixels reach the adaptive threshold: precision 1/2, recall 1.
    let (p, g) = to_maps(1, 2, &[1.0, 1.0], &[true, false]);
    let fm = f_mean(&p, &g, &cfg).unwrap();
    ensure((fm - expected).abs() <= 1e-15, || format!("F_mean = {fm}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let gt = random_mask(&mut rng, 16, 16);
        let pred = random_prediction(&mut rng, &gt);
        let (p, g) = to_maps(16, 16, &pred, &gt);
        let (so, sr) = oracle::s_components(&Pair { h: 16, w: 16, pred: &pred, gt: &gt });
        let (lib_so, lib_sr) = s_measure_components(&p, &g).unwrap();
        let s = s_measure(&p, &g, &cfg).unwrap();
        worst = worst
            .max((s - ((so + sr) / 2.0).max(0.0)).abs())
            .max((lib_so - so).abs())
            .max((lib_sr - sr).abs());
    }
    ensure(worst <= 1e-12, || format!("S-measure vs component mean {worst:e}"))?;
    Ok(format!("F = {f:.6}; S equals mean of components within {worst:.1e}"))
}

fn c8_poly_schedule() -> Outcome {
    let (base, max) = (0.01, 1000u64);
    let lr = |i| poly_lr(base, i, max, POLY_POWER).unwrap();
    ensure(POLY_POWER == 0.9, || format!("power {POLY_POWER}"))?;
    ensure(lr(0) == base && lr(max) == 0.0, || format!("lr(0) {} lr(max) {}", lr(0), lr(max)))?;
    for i in 0..max {
        ensure(lr(i + 1) < lr(i), || format!("not decreasing at {i}"))?;
    }
    let mid = lr(max / 2);
    let want = base * 0.5f64.powf(0.9);
    ensure((mid - want).abs() <= 1e-15, || format!("midpoint {mid} vs {want}"))?;
    Ok(format!("lr(0) = {base}, lr({max}) = 0, midpoint {mid:.15}"))
}

fn c9_he_initialization() -> Outcome {
    let fan_in = 4.0 * 9.0;
    let mut samples = Vec::new();
    let mut seed = 0;
    let mut spec = None;
    while samples.len() < 100_000 {
        let v = FusionVariant::cat_he(seed).unwrap();
        samples.extend_from_slice(v.first_layer().kernel().data());
        spec.get_or_insert(v);
        seed += 1;
    }
    samples.truncate(100_000);
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target = 2.0 / fan_in;
    let rel = (var / target - 1.0).abs();
    ensure(rel <= 0.1, || format!("variance {var} vs {target}"))?;
    ensure((he_std([64, 4, 3, 3]).powi(2) - target).abs() < 1e-15, || "he_std mismatch".into())?;

    let variant = spec.unwrap();
    let zeroed = variant.with_zeroed_depth_column().unwrap();
    let rgb_conv = variant.rgb_columns().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let (h, w) = (rng.random_range(1..12), rng.random_range(1..12));
        let rgb = uniform(&mut rng, &[3, h, w], -1.0, 1.0);
        let depth = DepthMap::new(uniform(&mut rng, &[1, h, w], 0.0, 1.0)).unwrap();
        let fused = early_fusion_first_layer(&rgb, &depth, &zeroed).unwrap();
        let plain = conv2d(&rgb, &rgb_conv).unwrap();
        let same = fused.shape() == plain.shape()
            && fused.data().iter().zip(plain.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, || format!("zeroed-depth layer differs at {h}x{w}"))?;
    }
    Ok(format!("variance {var:.5} vs 2/fan_in {target:.5} ({:.2}% off); zeroed depth column bitwise equal", rel * 100.0))
}

fn eval_outputs(root: &Path, out: &Path, workers: &str) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_sodbench"))
        .args(["eval", "--root", root.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers])
        .env_remove("SODBENCH_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    let mut bytes = o.stdout;
    for name in ["report.jsonl", "pr_curve.csv"] {
        bytes.extend(std::fs::read(out.join(name)).map_err(|e| e.to_string())?);
    }
    Ok(bytes)
}

fn c10_determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join("data");
    write_synthetic_dataset(&root, 10, 96, 128, 42).map_err(|e| e.to_string())?;
    let runs = [("a", "1"), ("b", "1"), ("c", "8")];
    let mut outputs = Vec::new();
    for (name, workers) in runs {
        outputs.push(eval_outputs(&root, &dir.path().join(name), workers)?);
    }
    let elapsed = start.elapsed();
    ensure(outputs.windows(2).all(|w| w[0] == w[1]), || "outputs differ between runs".into())?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("3 runs (workers 1, 1, 8) byte-identical in {elapsed:.2?}"))
}

fn c11_throughput() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_synthetic_dataset(dir.path(), 100, 384, 384, 42).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let pairs = pair_files(dir.path().join("pred"), dir.path().join("gt"), None).map_err(|e| e.to_string())?;
    let report = evaluate_dataset_with(&pairs.entries, PairEntry::load, &EvalConfig::default(), 1)
        .map_err(|e: sodbench_core::io::IoError| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(report.summary.images == 100, || format!("{} images evaluated", report.summary.images))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("100 pairs at 384x384 in {elapsed:.2?} on one worker"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("deda gradient vs central differences", c1_deda_gradient),
        ("deda background/saliency symmetry", c2_deda_symmetry),
        ("position attention rows sum to one", c3_attention_rows),
        ("attended branch reductions", c4_branch_reductions),
        ("metrics match dense oracles", c5_metric_oracles),
        ("perfect prediction identities", c6_perfect_prediction),
        ("F-measure and S-measure constants", c7_metric_constants),
        ("poly learning-rate schedule", c8_poly_schedule),
        ("He initialization and zeroed depth column", c9_he_initialization),
        ("eval determinism across workers", c10_determinism),
        ("throughput on 100 pairs at 384x384", c11_throughput),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
