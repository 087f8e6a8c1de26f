use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sodbench_core::metrics::{AdaptiveRule, EMeasureMode, EmptyGtPolicy, EvalConfig};

#[derive(Debug, Parser)]
#[command(name = "sodbench", version, about = "Saliency map evaluation and attention-kernel checks")]
pub struct Cli {
    /// Worker threads for per-image evaluation.
    #[arg(long, global = true, env = "SODBENCH_THREADS", default_value_t = 1)]
    pub workers: usize,

    /// Seed for every synthetic input.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Standard output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned, human-readable text.
    Table,
    /// One JSON object per line.
    Records,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a directory of predictions against ground-truth masks.
    Eval(EvalArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Run the attention blocks on synthetic inputs and dump every map.
    Demo(DemoArgs),
    /// Run the built-in invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset root holding `pred/`, `gt/` and optionally `depth/`.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Prediction directory (overrides `<root>/pred`).
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Ground-truth directory (overrides `<root>/gt`).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Depth directory (overrides `<root>/depth`); only used for pairing checks.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    /// Directory for `report.jsonl` and `pr_curve.csv`.
    #[arg(long, default_value = "sodbench-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    pub beta_sq: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = RuleArg::TwiceMean)]
    pub adaptive_rule: RuleArg,
    #[arg(long, value_enum, default_value_t = EmptyGtArg::Skip)]
    pub empty_gt: EmptyGtArg,
    /// Binarisation used for the E-measure.
    #[arg(long, value_enum, default_value_t = EMeasureArg::Adaptive)]
    pub e_measure: EMeasureArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    TwiceMean,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmptyGtArg {
    Skip,
    ScoreZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EMeasureArg {
    Adaptive,
    Max,
}

impl EvalArgs {
    pub fn config(&self) -> EvalConfig {
        EvalConfig {
            beta_sq: self.beta_sq,
            alpha: self.alpha,
            adaptive_rule: match self.adaptive_rule {
                RuleArg::TwiceMean => AdaptiveRule::TwiceMean,
                RuleArg::Mean => AdaptiveRule::Mean,
            },
            empty_gt_policy: match self.empty_gt {
                EmptyGtArg::Skip => EmptyGtPolicy::Skip,
                EmptyGtArg::ScoreZero => EmptyGtPolicy::ScoreZero,
            },
            e_measure_mode: match self.e_measure {
                EMeasureArg::Adaptive => EMeasureMode::Adaptive,
                EMeasureArg::Max => EMeasureMode::Max,
            },
            ..EvalConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Use all-zero tensors instead of random ones.
    #[arg(long)]
    pub zero: bool,
    /// Random instances per check.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Spatial side of each instance.
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Output directory for rasters, tensor dumps and weights.
    #[arg(long, default_value = "sodbench-demo")]
    pub out: PathBuf,
    /// Depth map file; a centred disk is used when absent.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    /// Use an all-zero depth map.
    #[arg(long, conflicts_with = "depth")]
    pub zero_depth: bool,
    /// Side of the synthetic feature maps.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    /// Feature channels.
    #[arg(long, default_value_t = 4)]
    pub channels: usize,
    /// Side of the pyramid-attention input.
    #[arg(long, default_value_t = 8)]
    pub pafe_size: usize,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}
