use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use datgan_core::markets::write_panel_csv;

use crate::config::{DataConfig, RunConfig};
use crate::provenance::{sidecar_path, Provenance};

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub train_csv: PathBuf,
    pub eval_csv: PathBuf,
    pub rows: (usize, usize),
    pub assets: usize,
}

/// Writes the training and held-out panels of a simulated source, each with
/// a provenance sidecar.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateSummary> {
    if !matches!(cfg.data, DataConfig::Simulated(_)) {
        bail!("simulate needs `data.source = \"simulated\"`");
    }
    let data = cfg.data.load(cfg.seed)?;
    let root = cfg.output_root();
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    let train_csv = root.join("panel.csv");
    let eval_csv = root.join("heldout.csv");
    for (path, panel, seed) in [
        (&train_csv, &data.train, cfg.seed),
        (&eval_csv, &data.eval, cfg.seed.wrapping_add(1)),
    ] {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        write_panel_csv(&mut w, panel)?;
        w.flush()?;
        Provenance::new("panel", "simulate", cfg, seed, std::slice::from_ref(path))?
            .with_data_hash(panel.content_hash())
            .write(&sidecar_path(path))?;
    }
    Ok(SimulateSummary {
        train_csv,
        eval_csv,
        rows: (data.train.len(), data.eval.len()),
        assets: data.train.assets(),
    })
}
