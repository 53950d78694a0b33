use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use datgan_core::gan::{TrainCheckpoint, TrainLogEntry, Trainer};
use datgan_core::ReturnPanel;

use super::{checkpoint_name, checkpoints_dir, core_err, list_checkpoints, run_dir};
use crate::config::RunConfig;
use crate::provenance::{sidecar_path, Provenance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resume {
    Fresh,
    /// Continue from the highest-step checkpoint of the run directory.
    Latest,
    From(PathBuf),
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    /// Steps of the checkpoints written by this invocation.
    pub checkpoints: Vec<u64>,
    pub final_step: u64,
    pub log_path: PathBuf,
    pub data_hash: u64,
}

pub fn cmd_train(cfg: &RunConfig, resume: &Resume) -> Result<TrainSummary> {
    let data = cfg.data.load(cfg.seed)?;
    train_on(cfg, data.train, resume)
}

pub(crate) fn train_on(cfg: &RunConfig, panel: ReturnPanel, resume: &Resume) -> Result<TrainSummary> {
    let run = run_dir(&cfg.output_root(), cfg.train.variant);
    let log_path = run.join("train_log.jsonl");
    let data_hash = panel.content_hash();
    let from = match resume {
        Resume::Fresh => None,
        Resume::Latest => match list_checkpoints(&run)?.pop() {
            Some((_, dir)) => Some(dir),
            None => bail!("nothing to resume in {}", run.display()),
        },
        Resume::From(dir) => Some(dir.clone()),
    };
    let (mut trainer, mut kept) = match &from {
        None => {
            let ck = checkpoints_dir(&run);
            if ck.exists() {
                fs::remove_dir_all(&ck).with_context(|| format!("clearing {}", ck.display()))?;
            }
            (Trainer::new(panel, cfg.train.clone(), cfg.decision)?, Vec::new())
        }
        Some(dir) => {
            let ck = TrainCheckpoint::load_dir(dir).with_context(|| format!("loading {}", dir.display()))?;
            let step = ck.manifest.step;
            let t = Trainer::from_checkpoint(panel, cfg.train.clone(), cfg.decision, &ck)?;
            (t, read_log(&log_path, step)?)
        }
    };
    fs::create_dir_all(&run).with_context(|| format!("creating {}", run.display()))?;
    fs::write(run.join("config.toml"), cfg.to_toml()?)?;

    let mut written = Vec::new();
    trainer.run(|t| {
        save(cfg, &run, &log_path, &kept, t, data_hash).map_err(core_err)?;
        written.push(t.step());
        Ok(())
    })?;
    if written.last() != Some(&trainer.step()) {
        // A resume at the final step trains nothing; still refresh the log.
        kept.extend(trainer.log().entries.iter().cloned());
        write_log(&log_path, &kept)?;
    }
    Ok(TrainSummary {
        run_dir: run,
        checkpoints: written,
        final_step: trainer.step(),
        log_path,
        data_hash,
    })
}

fn save(
    cfg: &RunConfig,
    run: &Path,
    log_path: &Path,
    kept: &[TrainLogEntry],
    t: &Trainer,
    data_hash: u64,
) -> Result<()> {
    let dir = checkpoints_dir(run).join(checkpoint_name(t.step()));
    let ck = t.checkpoint()?;
    ck.save_dir(&dir)?;
    let files: Vec<PathBuf> = [
        "manifest.json",
        ck.manifest.generator_file.as_str(),
        ck.manifest.discriminator_file.as_str(),
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    Provenance::new("checkpoint", "train", cfg, cfg.train.seed, &files)?
        .with_data_hash(data_hash)
        .write(&dir.join("provenance.json"))?;

    let mut entries = kept.to_vec();
    entries.extend(t.log().entries.iter().cloned());
    write_log(log_path, &entries)?;
    Provenance::new("train-log", "train", cfg, cfg.train.seed, &[log_path.to_path_buf()])?
        .with_data_hash(data_hash)
        .write(&sidecar_path(log_path))?;
    Ok(())
}

fn write_log(path: &Path, entries: &[TrainLogEntry]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Entries of an existing log up to and including `step`.
fn read_log(path: &Path, step: u64) -> Result<Vec<TrainLogEntry>> {
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let e: TrainLogEntry =
            serde_json::from_str(line).with_context(|| format!("{}:{}: bad log entry", path.display(), i + 1))?;
        if e.step <= step {
            out.push(e);
        }
    }
    Ok(out)
}
