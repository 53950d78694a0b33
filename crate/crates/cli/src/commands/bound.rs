use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use datgan_core::bounds::{chain_caps, required_samples, tail_failure_prob, tail_log_failure, BoundInputs, ChainCaps};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::provenance::{sidecar_path, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub ln_b_star: f64,
    pub log_failure: f64,
    pub failure_prob: f64,
    pub delta: f64,
    pub required_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_samples_error: Option<String>,
    /// Decision-chain caps, present when `b_f` was derived from them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_caps: Option<ChainCaps>,
}

impl BoundReport {
    pub fn table(&self) -> String {
        let x = &self.inputs;
        let mut s = String::new();
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "{k:<22}{v}");
        };
        for (k, v) in [
            ("b_x", x.b_x),
            ("b_f", x.b_f),
            ("K", x.k),
            ("delta_beta", x.delta_beta),
            ("L", x.l),
            ("L_tilde", x.l_tilde),
            ("p", x.p),
            ("I", x.i),
            ("M", x.m),
            ("eps", x.eps),
            ("C", x.c),
        ] {
            row(k, format!("{v}"));
        }
        row("ln B_*", format!("{:.6}", self.ln_b_star));
        row("ln failure bound", format!("{:.6e}", self.log_failure));
        row("failure bound", format!("{:.6e}", self.failure_prob));
        let need = match (&self.required_samples, &self.required_samples_error) {
            (Some(n), _) => n.to_string(),
            (None, Some(e)) => format!("unreachable ({e})"),
            (None, None) => "-".into(),
        };
        row(&format!("I for delta={}", self.delta), need);
        s
    }
}

/// Evaluates the tail bound for `cfg.bound`, prints nothing, and writes
/// `bound.json` under the output root.
pub fn cmd_bound(cfg: &RunConfig, delta: f64, utility_support: bool) -> Result<(BoundReport, PathBuf)> {
    let mut inputs = cfg.bound;
    let chain_caps = if utility_support {
        inputs = inputs.with_utility_support()?;
        Some(chain_caps(inputs.b_r, inputs.tau, inputs.phi, inputs.d)?)
    } else {
        None
    };
    let (required, err) = match required_samples(&inputs, delta) {
        Ok(n) => (Some(n), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = BoundReport {
        inputs,
        ln_b_star: inputs.ln_b_star(),
        log_failure: tail_log_failure(&inputs)?,
        failure_prob: tail_failure_prob(&inputs)?,
        delta,
        required_samples: required,
        required_samples_error: err,
        chain_caps,
    };
    let root = cfg.output_root();
    fs::create_dir_all(&root)?;
    let path = root.join("bound.json");
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&path, text)?;
    Provenance::new("bound", "bound", cfg, cfg.seed, std::slice::from_ref(&path))?.write(&sidecar_path(&path))?;
    Ok((report, path))
}
