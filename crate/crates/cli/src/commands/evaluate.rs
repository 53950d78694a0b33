use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use datgan_core::gan::TrainCheckpoint;
use datgan_core::markets::PreparedPanel;
use datgan_core::transport::{evaluate, BlockSource, ReplaySource, ReportRow, Solver};
use datgan_core::ReturnPanel;
use serde::{Deserialize, Serialize};

use super::expand_checkpoints;
use crate::config::RunConfig;
use crate::provenance::{sidecar_path, Provenance};

pub const REPORT_HEADER: &str = "variant,checkpoint_step,quantity,k,solver,distance,n_real,n_synth,eps";

/// A report row keyed by the variant that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: String,
    pub checkpoint_step: u64,
    pub quantity: String,
    pub k: usize,
    pub solver: Solver,
    pub distance: f64,
    pub n_real: usize,
    pub n_synth: usize,
    pub eps: Option<f64>,
}

impl VariantRow {
    fn new(variant: &str, r: ReportRow) -> Self {
        Self {
            variant: variant.to_string(),
            checkpoint_step: r.checkpoint_step,
            quantity: r.quantity,
            k: r.k,
            solver: r.solver,
            distance: r.distance,
            n_real: r.n_real,
            n_synth: r.n_synth,
            eps: r.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalTarget {
    /// Checkpoint directories, or run directories whose checkpoints are all
    /// evaluated.
    Checkpoints(Vec<PathBuf>),
    /// The real future blocks themselves, reported as variant `replay`.
    Replay,
}

/// Evaluates against the held-out panel and appends the rows to `out`
/// (default `report.csv` under the output root).
pub fn cmd_evaluate(cfg: &RunConfig, target: &EvalTarget, out: Option<&Path>) -> Result<(PathBuf, Vec<VariantRow>)> {
    let data = cfg.data.load(cfg.seed)?;
    let prep = prepare(cfg, data.eval)?;
    let rows = match target {
        EvalTarget::Replay => evaluate_source(cfg, &prep, &ReplaySource, "replay", 0)?,
        EvalTarget::Checkpoints(paths) => evaluate_checkpoints(cfg, &prep, &expand_checkpoints(paths)?)?,
    };
    let path = out.map_or_else(|| cfg.output_root().join("report.csv"), Path::to_path_buf);
    append_rows(&path, &rows)?;
    Provenance::new("report", "evaluate", cfg, cfg.eval.seed, std::slice::from_ref(&path))?
        .write(&sidecar_path(&path))?;
    Ok((path, rows))
}

pub(crate) fn prepare(cfg: &RunConfig, panel: ReturnPanel) -> Result<PreparedPanel> {
    Ok(PreparedPanel::new(
        panel,
        cfg.eval.horizon(),
        cfg.train.windows,
        cfg.decision,
    )?)
}

pub(crate) fn evaluate_source(
    cfg: &RunConfig,
    prep: &PreparedPanel,
    source: &dyn BlockSource,
    variant: &str,
    step: u64,
) -> Result<Vec<VariantRow>> {
    let report = evaluate(source, prep, None, &cfg.eval, step)?;
    Ok(report.rows.into_iter().map(|r| VariantRow::new(variant, r)).collect())
}

pub(crate) fn evaluate_checkpoints(cfg: &RunConfig, prep: &PreparedPanel, dirs: &[PathBuf]) -> Result<Vec<VariantRow>> {
    let mut rows = Vec::new();
    for dir in dirs {
        let ck = TrainCheckpoint::load_dir(dir).with_context(|| format!("loading {}", dir.display()))?;
        let bank = ck.generator_bank()?;
        if bank.assets() != prep.panel().assets() {
            anyhow::bail!(
                "{} has {} assets, the evaluation panel has {}",
                dir.display(),
                bank.assets(),
                prep.panel().assets()
            );
        }
        rows.extend(evaluate_source(
            cfg,
            prep,
            &bank,
            ck.manifest.variant.label(),
            ck.manifest.step,
        )?);
    }
    Ok(rows)
}

pub(crate) fn write_rows(path: &Path, rows: &[VariantRow], header: bool) -> Result<()> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if header {
        w.write_record(REPORT_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn append_rows(path: &Path, rows: &[VariantRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    write_rows(path, rows, fresh)
}

pub fn read_report(path: &Path) -> Result<Vec<VariantRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<VariantRow>, _>>()?;
    Ok(rows)
}
