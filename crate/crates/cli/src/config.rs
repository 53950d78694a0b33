use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use datgan_core::bounds::BoundInputs;
use datgan_core::markets::{load_etf_csv, simulate_panel, DgpParams, ReturnPanel};
use datgan_core::transport::EvalConfig;
use datgan_core::{DecisionParams, TrainConfig};
use serde::{Deserialize, Serialize};

/// Overrides the root that relative output directories are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "DATGAN_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seed of the data source. Model seeds live in `train.seed`.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub decision: DecisionParams,
    pub eval: EvalConfig,
    pub bound: BoundInputs,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs"),
            data: DataConfig::default(),
            train: TrainConfig::default(),
            decision: DecisionParams::default(),
            eval: EvalConfig::default(),
            bound: BoundInputs::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataConfig {
    Simulated(SimulatedData),
    Csv(CsvData),
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Simulated(SimulatedData::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulatedData {
    /// Rows of the training panel.
    pub len: usize,
    /// Rows of the held-out panel, simulated with seed `seed + 1`.
    pub eval_len: usize,
    pub burn_in: usize,
    pub dgp: DgpParams,
}

impl Default for SimulatedData {
    fn default() -> Self {
        Self {
            len: 2048,
            eval_len: 2048,
            burn_in: 500,
            dgp: DgpParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvData {
    /// Price file with `date,ticker,close` rows.
    pub path: PathBuf,
    pub tickers: Vec<String>,
    #[serde(default = "default_train_split")]
    pub train: [String; 2],
    #[serde(default = "default_eval_split")]
    pub eval: [String; 2],
}

fn default_train_split() -> [String; 2] {
    ["1999-01-01".into(), "2006-12-31".into()]
}

fn default_eval_split() -> [String; 2] {
    ["2007-01-01".into(), "2016-12-31".into()]
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

impl CsvData {
    pub fn validate(&self) -> Result<()> {
        if self.tickers.is_empty() {
            bail!("data.tickers is empty");
        }
        for d in self.train.iter().chain(&self.eval) {
            if !is_iso_date(d) {
                bail!("split date `{d}` is not YYYY-MM-DD");
            }
        }
        let [a, b] = &self.train;
        let [c, d] = &self.eval;
        if !(a <= b && b < c && c <= d) {
            bail!("split dates out of order: train {a}..{b}, eval {c}..{d}");
        }
        Ok(())
    }
}

/// Training and held-out panels.
#[derive(Debug, Clone)]
pub struct Data {
    pub train: ReturnPanel,
    pub eval: ReturnPanel,
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            DataConfig::Simulated(s) => {
                s.dgp.validate()?;
                if s.len == 0 || s.eval_len == 0 {
                    bail!("simulated panel lengths must be >= 1");
                }
                Ok(())
            }
            DataConfig::Csv(c) => c.validate(),
        }
    }

    pub fn load(&self, seed: u64) -> Result<Data> {
        match self {
            DataConfig::Simulated(s) => Ok(Data {
                train: simulate_panel(&s.dgp, s.len, s.burn_in, seed)?,
                eval: simulate_panel(&s.dgp, s.eval_len, s.burn_in, seed.wrapping_add(1))?,
            }),
            DataConfig::Csv(c) => {
                let all = load_etf_csv(&c.path, &c.tickers)
                    .with_context(|| format!("loading prices from {}", c.path.display()))?;
                Ok(Data {
                    train: all.date_range(&c.train[0], &c.train[1])?,
                    eval: all.date_range(&c.eval[0], &c.eval[1])?,
                })
            }
        }
    }
}

impl RunConfig {
    /// Reads an optional TOML file, applies `key.path=value` overrides and
    /// validates the result. Without a file the defaults are used, and a
    /// `data` table without `source` is simulated. A `.json`
    /// path is read as a provenance sidecar and its embedded configuration
    /// is used.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) if p.extension().is_some_and(|e| e == "json") => {
                let cfg = crate::provenance::Provenance::read(p)?.config;
                toml::Table::try_from(cfg)?
            }
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if let Some(toml::Value::Table(data)) = table.get_mut("data") {
            data.entry("source").or_insert_with(|| "simulated".into());
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.train.validate()?;
        self.decision.validate()?;
        self.eval.validate()?;
        self.bound.validate()?;
        Ok(())
    }

    /// `output_dir`, joined onto the output-root variable when relative.
    pub fn output_root(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Sets `a.b.c = value`. The value is parsed as TOML and kept as a string
/// when it does not parse.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let Some((key, raw)) = spec.split_once('=') else {
        bail!("override `{spec}` is not key=value");
    };
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("bad override key `{key}`");
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override `{key}`: `{p}` is not a table"),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
