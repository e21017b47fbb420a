//! Command-line front end: dataset generation, training, evaluation, CAM
//! rendering and cluster listings. Exit codes: 0 success, 1 runtime or I/O
//! failure, 2 usage error.

mod cam;
mod dump;
mod eval;
mod gen;
mod run_manifest;
mod train;

pub use dump::render_clusters;
pub use eval::{evaluate, EvalContext, Task};
pub use run_manifest::{sha256_file, sha256_hex, RunManifest, TOOL_VERSION};

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use xmc_core::trainer::{parse_config, TrainConfig};

/// A problem with how the tool was invoked; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "xmc", version, about = "Self-supervised cross-modal clustering of images and captions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic shapes-world dataset.
    Gen(gen::GenArgs),
    /// Train the image and word encoders on a dataset.
    Train(train::TrainArgs),
    /// Evaluate a trained model on one task.
    Eval(eval::EvalArgs),
    /// Render class activation maps and boxes for one image.
    Cam(cam::CamArgs),
    /// List the words assigned to each cluster.
    DumpClusters(dump::DumpArgs),
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match configure_threads().and_then(|_| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Cam(a) => cam::run(a),
        Command::DumpClusters(a) => dump::run(a),
    }
}

/// `XMC_THREADS` caps the worker pool.
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("XMC_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("XMC_THREADS must be a positive integer, got {value:?}")))?;
    // A pool already built by an earlier call in this process keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// `--data` may name a manifest file or a directory containing `manifest.tsv`.
pub(crate) fn manifest_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join("manifest.tsv")
    } else {
        data.to_path_buf()
    }
}

/// Config from a file; bad keys or values are usage errors.
pub(crate) fn read_config(path: &Path, base: TrainConfig) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text, base).map_err(|e| usage(format!("{}: {e}", path.display())))
}
