//! Command-line front end: dataset evaluation, gradient checks, attention
//! demos and self-tests.
//!
//! Exit codes are 0 on success, 1 when a check fails and 2 on usage or I/O
//! errors.

pub mod cli;
mod demo;
mod eval;
mod gradcheck;
mod selftest;
pub mod synth;

use std::io::Write;

use sodbench_core::io::IoError;
use sodbench_core::kernels::{BundleError, KernelError};
use sodbench_core::metrics::MetricError;
use sodbench_core::TensorError;

pub use cli::{Cli, Command, Format};
pub use gradcheck::{run_checks as gradient_checks, CheckResult as GradientCheck};
pub use selftest::{run_checks as self_checks, SelfCheck};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Write {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("output: {0}")]
    Stdout(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailed,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::CheckFailed => 1,
        }
    }
}

pub const USAGE_EXIT: u8 = 2;

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Eval(args) => eval::run(args, cli, out),
        Command::Gradcheck(args) => gradcheck::run(args, cli, out),
        Command::Demo(args) => demo::run(args, cli, out),
        Command::Selftest(args) => selftest::run(args, cli, out),
    }
}

pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn create_dir(path: &std::path::Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}
