//! Subcommand implementations. Each returns a summary and leaves printing to
//! the binary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use datgan_core::Variant;

mod ablate;
mod bound;
mod evaluate;
mod simulate;
mod train;

pub use ablate::{cmd_ablate, AblateSummary};
pub use bound::{cmd_bound, BoundReport};
pub use evaluate::{cmd_evaluate, read_report, EvalTarget, VariantRow, REPORT_HEADER};
pub use simulate::{cmd_simulate, SimulateSummary};
pub use train::{cmd_train, Resume, TrainSummary};

/// Directory of one trained variant below the output root.
pub fn run_dir(root: &Path, variant: Variant) -> PathBuf {
    root.join(variant.label())
}

pub fn checkpoints_dir(run: &Path) -> PathBuf {
    run.join("checkpoints")
}

pub fn checkpoint_name(step: u64) -> String {
    format!("step-{step:09}")
}

/// Checkpoint directories below `run`, ordered by step.
pub fn list_checkpoints(run: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let dir = checkpoints_dir(run);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(&dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("step-"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(step) = step {
            if path.join("manifest.json").is_file() {
                out.push((step, path));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Expands run directories into their checkpoints and keeps checkpoint
/// directories as they are.
pub fn expand_checkpoints(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.join("manifest.json").is_file() {
            out.push(p.clone());
            continue;
        }
        let found = list_checkpoints(p)?;
        if found.is_empty() {
            anyhow::bail!("no checkpoint at or below {}", p.display());
        }
        out.extend(found.into_iter().map(|(_, d)| d));
    }
    Ok(out)
}

fn core_err(e: anyhow::Error) -> datgan_core::Error {
    datgan_core::Error::Internal(format!("{e:#}"))
}
