use rayon::prelude::*;
use serde::Serialize;

use super::{
    adaptive_threshold, e_measure_with_mode, f_max, f_mean, f_weighted, mae, pr_curve, s_measure, EmptyGtPolicy,
    EvalConfig, GroundTruthMask, MetricError, PrCurve, Result, SaliencyMap,
};

/// One prediction and its ground truth, identified by file stem.
#[derive(Debug, Clone)]
pub struct EvalPair {
    pub stem: String,
    pub pred: SaliencyMap,
    pub gt: GroundTruthMask,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRecord {
    pub stem: String,
    pub mae: f64,
    pub f_max: f64,
    pub f_mean: f64,
    pub f_weighted: f64,
    pub s_measure: f64,
    pub e_measure: f64,
    /// Adaptive binarisation level on the 0..=255 scale.
    pub adaptive_threshold: f64,
    #[serde(skip)]
    pub pr: PrCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub images: usize,
    pub mae: f64,
    /// Maximum F-measure of the dataset-mean PR curve.
    pub f_max: f64,
    pub f_mean: f64,
    pub f_weighted: f64,
    pub s_measure: f64,
    pub e_measure: f64,
    /// Mean of the per-image maximum F-measures.
    pub mean_image_f_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub images: Vec<ImageRecord>,
    pub skipped: Vec<String>,
    pub summary: MetricSummary,
    pub pr: PrCurve,
}

impl MetricReport {
    /// Sorts records and skipped stems, then averages in that order.
    pub fn aggregate(mut images: Vec<ImageRecord>, mut skipped: Vec<String>, cfg: &EvalConfig) -> Result<Self> {
        if images.is_empty() {
            return Err(MetricError::NoPairs(if skipped.is_empty() {
                "no image pairs".into()
            } else {
                format!("all {} images were skipped", skipped.len())
            }));
        }
        images.sort_by(|a, b| a.stem.cmp(&b.stem));
        skipped.sort();
        let n = images.len() as f64;
        let mean = |f: fn(&ImageRecord) -> f64| images.iter().map(f).sum::<f64>() / n;
        let pr = PrCurve::mean_of(images.iter().map(|r| &r.pr)).expect("non-empty");
        let summary = MetricSummary {
            images: images.len(),
            mae: mean(|r| r.mae),
            f_max: f_max(&pr, cfg),
            f_mean: mean(|r| r.f_mean),
            f_weighted: mean(|r| r.f_weighted),
            s_measure: mean(|r| r.s_measure),
            e_measure: mean(|r| r.e_measure),
            mean_image_f_max: mean(|r| r.f_max),
        };
        Ok(Self { images, skipped, summary, pr })
    }
}

/// Scores one pair. The prediction is resized to the mask size first when
/// they differ. Returns `None` for an empty mask under the skip policy.
pub fn evaluate_pair(pair: &EvalPair, cfg: &EvalConfig) -> Result<Option<ImageRecord>> {
    cfg.validate()?;
    let (h, w) = pair.gt.height_width();
    let resized;
    let pred = if pair.pred.height_width() == (h, w) {
        &pair.pred
    } else {
        resized = pair.pred.resized(h, w)?;
        &resized
    };
    let gt = &pair.gt;
    let empty = gt.foreground_count() == 0;
    if empty && cfg.empty_gt_policy == EmptyGtPolicy::Skip {
        return Ok(None);
    }
    let (pr, f_mean_v, f_w) = if empty {
        (PrCurve::zeros(), 0.0, 0.0)
    } else {
        (pr_curve(pred, gt)?, f_mean(pred, gt, cfg)?, f_weighted(pred, gt, cfg)?)
    };
    Ok(Some(ImageRecord {
        stem: pair.stem.clone(),
        mae: mae(pred, gt)?,
        f_max: f_max(&pr, cfg),
        f_mean: f_mean_v,
        f_weighted: f_w,
        s_measure: s_measure(pred, gt, cfg)?,
        e_measure: e_measure_with_mode(pred, gt, cfg)?,
        adaptive_threshold: adaptive_threshold(pred, cfg.adaptive_rule),
        pr,
    }))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| MetricError::Config(format!("thread pool: {e}")))
}

/// Evaluates pairs on `workers` threads. The report does not depend on the
/// worker count.
pub fn evaluate_dataset(pairs: &[EvalPair], cfg: &EvalConfig, workers: usize) -> Result<MetricReport> {
    evaluate_dataset_with(pairs, |p| Ok::<_, MetricError>(p.clone()), cfg, workers)
}

/// Like [`evaluate_dataset`], but materialises each pair with `load` on the
/// worker thread so only in-flight pairs are held in memory.
pub fn evaluate_dataset_with<T, F, E>(items: &[T], load: F, cfg: &EvalConfig, workers: usize) -> Result<MetricReport, E>
where
    T: Sync,
    F: Fn(&T) -> Result<EvalPair, E> + Sync,
    E: From<MetricError> + Send,
{
    cfg.validate()?;
    if items.is_empty() {
        return Err(MetricError::NoPairs("no image pairs".into()).into());
    }
    let results: Vec<Result<(String, Option<ImageRecord>), E>> = pool(workers)?.install(|| {
        items
            .par_iter()
            .map(|item| {
                let pair = load(item)?;
                Ok((pair.stem.clone(), evaluate_pair(&pair, cfg)?))
            })
            .collect()
    });
    let mut images = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for r in results {
        match r? {
            (_, Some(rec)) => images.push(rec),
            (stem, None) => skipped.push(stem),
        }
    }
    Ok(MetricReport::aggregate(images, skipped, cfg)?)
}
