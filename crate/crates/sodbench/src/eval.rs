use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use sodbench_core::io::{pair_files, PairEntry, PairSet};
use sodbench_core::metrics::{evaluate_dataset_with, ImageRecord, MetricReport, MetricSummary, THRESHOLDS};

use crate::cli::{EvalArgs, Format};
use crate::{create_dir, write_file, Cli, CliError, Outcome};

pub const REPORT_FILE: &str = "report.jsonl";
pub const PR_FILE: &str = "pr_curve.csv";

fn resolve(explicit: &Option<PathBuf>, root: &Option<PathBuf>, sub: &str) -> Option<PathBuf> {
    explicit.clone().or_else(|| root.as_ref().map(|r| r.join(sub)))
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line<'a> {
    Image(&'a ImageRecord),
    Skipped { stem: &'a str },
    Unmatched { side: &'static str, stem: &'a str },
    Ignored { path: String },
    Summary(&'a MetricSummary),
}

fn report_lines(report: &MetricReport, pairs: &PairSet) -> Result<String, CliError> {
    let mut lines = Vec::new();
    lines.extend(report.images.iter().map(Line::Image));
    lines.extend(report.skipped.iter().map(|s| Line::Skipped { stem: s }));
    let u = &pairs.unmatched;
    for (side, stems) in [
        ("pred_only", &u.pred_only),
        ("gt_only", &u.gt_only),
        ("depth_missing", &u.depth_missing),
        ("depth_only", &u.depth_only),
    ] {
        lines.extend(stems.iter().map(|s| Line::Unmatched { side, stem: s }));
    }
    lines.extend(pairs.ignored.iter().map(|p| Line::Ignored {
        path: p.display().to_string(),
    }));
    lines.push(Line::Summary(&report.summary));
    let mut text = String::new();
    for l in &lines {
        text.push_str(&serde_json::to_string(l)?);
        text.push('\n');
    }
    Ok(text)
}

/// `t,precision,recall` for each threshold, no header.
pub fn pr_table(report: &MetricReport) -> String {
    let mut text = String::new();
    for t in 0..THRESHOLDS {
        let _ = writeln!(text, "{t},{},{}", report.pr.precision[t], report.pr.recall[t]);
    }
    text
}

/// Summary row in the column order F_max, F_mean, F_w, S_m, E_m, M.
pub fn summary_table(s: &MetricSummary) -> String {
    let header = ["images", "F_max", "F_mean", "F_w", "S_m", "E_m", "M"];
    let values = [s.f_max, s.f_mean, s.f_weighted, s.s_measure, s.e_measure, s.mae];
    let mut text = String::new();
    for h in header {
        let _ = write!(text, "{h:>8}");
    }
    text.push('\n');
    let _ = write!(text, "{:>8}", s.images);
    for v in values {
        let _ = write!(text, "{v:>8.4}");
    }
    text.push('\n');
    text
}

pub fn run(args: &EvalArgs, cli: &Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let pred = resolve(&args.pred, &args.root, "pred")
        .ok_or_else(|| CliError::Usage("eval needs --pred or --root".into()))?;
    let gt = resolve(&args.gt, &args.root, "gt").ok_or_else(|| CliError::Usage("eval needs --gt or --root".into()))?;
    let depth = match (&args.depth, &args.root) {
        (Some(d), _) => Some(d.clone()),
        (None, Some(r)) if r.join("depth").is_dir() => Some(r.join("depth")),
        _ => None,
    };
    let cfg = args.config();
    cfg.validate()?;

    let pairs = pair_files(&pred, &gt, depth.as_deref())?;
    let u = &pairs.unmatched;
    for (what, stems) in [("prediction", &u.pred_only), ("ground truth", &u.gt_only)] {
        if !stems.is_empty() {
            eprintln!("warning: {} stem(s) with a {what} only: {}", stems.len(), stems.join(", "));
        }
    }
    let report = evaluate_dataset_with(&pairs.entries, PairEntry::load, &cfg, cli.workers)?;

    create_dir(&args.out)?;
    write_file(&args.out.join(REPORT_FILE), report_lines(&report, &pairs)?.as_bytes())?;
    write_file(&args.out.join(PR_FILE), pr_table(&report).as_bytes())?;

    match cli.format {
        Format::Table => out.write_all(summary_table(&report.summary).as_bytes())?,
        Format::Records => writeln!(out, "{}", serde_json::to_string(&report.summary)?)?,
    }
    Ok(Outcome::Success)
}
