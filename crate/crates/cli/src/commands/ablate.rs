use std::fs;
use std::path::PathBuf;
use std::thread;

use anyhow::{anyhow, Result};
use datgan_core::markets::PreparedPanel;
use datgan_core::{ReturnPanel, Variant};

use super::evaluate::{evaluate_checkpoints, prepare, write_rows};
use super::train::train_on;
use super::{list_checkpoints, Resume, TrainSummary, VariantRow};
use crate::config::RunConfig;
use crate::provenance::{sidecar_path, Provenance};

#[derive(Debug, Clone)]
pub struct AblateSummary {
    pub report: PathBuf,
    pub rows: Vec<VariantRow>,
    /// Training-panel hash seen by each variant, in `Variant::ALL` order.
    pub data_hashes: Vec<(Variant, u64)>,
    pub runs: Vec<TrainSummary>,
}

/// Trains and evaluates every variant on one data draw. Variant `i` of
/// `Variant::ALL` uses model seed `train.seed + i`. Up to `jobs` variants
/// run at once, each in its own directory.
pub fn cmd_ablate(cfg: &RunConfig, jobs: usize) -> Result<AblateSummary> {
    let data = cfg.data.load(cfg.seed)?;
    let prep = prepare(cfg, data.eval)?;
    let configs: Vec<RunConfig> = Variant::ALL
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut c = cfg.clone();
            c.train.variant = v;
            c.train.seed = cfg.train.seed.wrapping_add(i as u64);
            c
        })
        .collect();

    let mut results: Vec<(TrainSummary, Vec<VariantRow>)> = Vec::with_capacity(configs.len());
    for chunk in configs.chunks(jobs.max(1)) {
        let done: Vec<Result<(TrainSummary, Vec<VariantRow>)>> = thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|c| {
                    let panel = data.train.clone();
                    let prep = &prep;
                    s.spawn(move || one_variant(c, panel, prep))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("ablation worker panicked"))))
                .collect()
        });
        for r in done {
            results.push(r?);
        }
    }

    let root = cfg.output_root();
    fs::create_dir_all(&root)?;
    let report = root.join("ablation.csv");
    if report.exists() {
        fs::remove_file(&report)?;
    }
    let rows: Vec<VariantRow> = results.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    write_rows(&report, &rows, true)?;
    Provenance::new(
        "ablation-report",
        "ablate",
        cfg,
        cfg.seed,
        std::slice::from_ref(&report),
    )?
    .with_data_hash(data.train.content_hash())
    .write(&sidecar_path(&report))?;

    let data_hashes = configs
        .iter()
        .zip(&results)
        .map(|(c, (t, _))| (c.train.variant, t.data_hash))
        .collect();
    Ok(AblateSummary {
        report,
        rows,
        data_hashes,
        runs: results.into_iter().map(|(t, _)| t).collect(),
    })
}

fn one_variant(cfg: &RunConfig, panel: ReturnPanel, prep: &PreparedPanel) -> Result<(TrainSummary, Vec<VariantRow>)> {
    let summary = train_on(cfg, panel, &Resume::Fresh)?;
    let dirs: Vec<PathBuf> = list_checkpoints(&summary.run_dir)?
        .into_iter()
        .map(|(_, d)| d)
        .collect();
    let rows = evaluate_checkpoints(cfg, prep, &dirs)?;
    Ok((summary, rows))
}
