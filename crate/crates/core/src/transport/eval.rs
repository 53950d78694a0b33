use std::fmt;
use std::io::{Read, Write};
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{w1_1d, w_exact_capped, w_sinkhorn, PointCloud, SinkhornConfig, DEFAULT_LP_CAP};
use crate::decision::{decision_chain, DecisionChainOutput};
use crate::error::{Error, Result};
use crate::gan::GeneratorBank;
use crate::linalg::upper_triangle;
use crate::markets::PreparedPanel;

pub const CSV_HEADER: &str = "checkpoint_step,quantity,k,solver,distance,n_real,n_synth,eps";

/// Anything that produces a `steps x d` block for an anchor.
pub trait BlockSource {
    fn block(&self, panel: &PreparedPanel, t: usize, steps: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>>;
}

impl BlockSource for GeneratorBank {
    fn block(&self, panel: &PreparedPanel, t: usize, steps: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
        self.generate_block(panel.conditioning(t)?, steps, rng)
    }
}

/// Returns the real future block; every distance it produces is zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReplaySource;

impl BlockSource for ReplaySource {
    fn block(&self, panel: &PreparedPanel, t: usize, steps: usize, _rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
        let b = panel.real_block(t)?;
        Ok(b.rows(0, steps).into_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalQuantity {
    Returns,
    /// Upper triangle of the precision estimate.
    Precision,
    Weights,
    Utility,
}

impl EvalQuantity {
    pub const ALL: [EvalQuantity; 4] = [
        EvalQuantity::Returns,
        EvalQuantity::Precision,
        EvalQuantity::Weights,
        EvalQuantity::Utility,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EvalQuantity::Returns => "returns",
            EvalQuantity::Precision => "precision",
            EvalQuantity::Weights => "weights",
            EvalQuantity::Utility => "utility",
        }
    }

    fn decision(self, out: &DecisionChainOutput) -> Vec<f64> {
        match self {
            EvalQuantity::Returns => unreachable!("returns come from the block"),
            EvalQuantity::Precision => upper_triangle(&out.h_hat),
            EvalQuantity::Weights => out.w.as_slice().to_vec(),
            EvalQuantity::Utility => vec![out.utility],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Solver {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "sinkhorn")]
    Sinkhorn,
    #[serde(rename = "sorted-1d")]
    Sorted1d,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Exact => "exact",
            Solver::Sinkhorn => "sinkhorn",
            Solver::Sorted1d => "sorted-1d",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Reported steps for returns; step `s` is block row `s`.
    pub return_steps: Vec<usize>,
    /// Reported decision steps. Step `s` is the decision taken after `s`
    /// generated rows, i.e. chain entry `s + 1`; step-1 values at chain
    /// entry 1 depend on real data only.
    pub decision_steps: Vec<usize>,
    pub quantities: Vec<EvalQuantity>,
    /// Points per side for the exact solver; larger pools are subsampled.
    pub lp_cap: usize,
    /// Entropic cross-check on the same clouds; `None` disables it and is
    /// written as `false`.
    #[serde(with = "optional_table")]
    pub sinkhorn: Option<SinkhornConfig>,
    pub draws_per_anchor: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            return_steps: vec![1, 4],
            decision_steps: vec![1, 3],
            quantities: EvalQuantity::ALL.to_vec(),
            lp_cap: DEFAULT_LP_CAP,
            sinkhorn: Some(SinkhornConfig::default()),
            draws_per_anchor: 1,
            seed: 0,
        }
    }
}

impl EvalConfig {
    /// Block length needed to report every configured step.
    pub fn horizon(&self) -> usize {
        let r = self.return_steps.iter().copied().max().unwrap_or(0);
        let d = self.decision_steps.iter().map(|s| s + 1).max().unwrap_or(0);
        r.max(d).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.return_steps.iter().chain(&self.decision_steps).any(|&s| s == 0) {
            return Err(Error::InvalidParameter("reported steps are 1-based".into()));
        }
        if self.lp_cap == 0 || self.draws_per_anchor == 0 {
            return Err(Error::InvalidParameter(
                "lp_cap and draws_per_anchor must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn steps_for(&self, q: EvalQuantity) -> &[usize] {
        match q {
            EvalQuantity::Returns => &self.return_steps,
            _ => &self.decision_steps,
        }
    }
}

mod optional_table {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::transport::SinkhornConfig;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Flag(bool),
        Table(SinkhornConfig),
    }

    pub fn serialize<S: Serializer>(v: &Option<SinkhornConfig>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(c) => c.serialize(s),
            None => s.serialize_bool(false),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<SinkhornConfig>, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Flag(true) => Some(SinkhornConfig::default()),
            Repr::Flag(false) => None,
            Repr::Table(c) => Some(c),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub checkpoint_step: u64,
    pub quantity: String,
    pub k: usize,
    pub solver: Solver,
    pub distance: f64,
    pub n_real: usize,
    pub n_synth: usize,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WassersteinReport {
    pub rows: Vec<ReportRow>,
}

impl WassersteinReport {
    pub fn get(&self, quantity: &str, k: usize, solver: Solver) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.quantity == quantity && r.k == k && r.solver == solver)
    }

    /// The distance used for plots: the exact or sorted solver.
    pub fn primary(&self, quantity: &str, k: usize) -> Option<f64> {
        self.get(quantity, k, Solver::Exact)
            .or_else(|| self.get(quantity, k, Solver::Sorted1d))
            .map(|r| r.distance)
    }

    pub fn write_csv<W: Write>(&self, w: W, header: bool) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(header).from_writer(w);
        for r in &self.rows {
            wr.serialize(r).map_err(csv_err)?;
        }
        if header && self.rows.is_empty() {
            wr.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd
            .deserialize()
            .collect::<std::result::Result<Vec<ReportRow>, _>>()
            .map_err(csv_err)?;
        Ok(Self { rows })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(format!("report csv: {e}"))
}

/// Pools real and synthetic quantities over the anchors and reports one
/// distance per quantity and step.
pub fn evaluate(
    source: &dyn BlockSource,
    panel: &PreparedPanel,
    anchors: Option<RangeInclusive<usize>>,
    cfg: &EvalConfig,
    checkpoint_step: u64,
) -> Result<WassersteinReport> {
    cfg.validate()?;
    let horizon = cfg.horizon();
    if panel.steps() < horizon {
        return Err(Error::InvalidParameter(format!(
            "evaluation needs blocks of {horizon} steps, panel was prepared for {}",
            panel.steps()
        )));
    }
    let all = panel.anchors();
    let range = anchors.unwrap_or_else(|| all.clone());
    if range.is_empty() || range.start() < all.start() || range.end() > all.end() {
        return Err(Error::EmptyAnchorRange {
            needed: horizon,
            available: range.clone().count(),
        });
    }

    let params = panel.params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // pools[q][s] = (real points, synthetic points)
    type Pool = (Vec<Vec<f64>>, Vec<Vec<f64>>);
    let mut pools: Vec<Vec<Pool>> = cfg
        .quantities
        .iter()
        .map(|&q| vec![(Vec::new(), Vec::new()); cfg.steps_for(q).len()])
        .collect();
    for t in range {
        let real_block = panel.real_block(t)?;
        let real_chain = panel.real_chain(t)?;
        let cond = panel.conditioning(t)?;
        for (qi, &q) in cfg.quantities.iter().enumerate() {
            for (si, &s) in cfg.steps_for(q).iter().enumerate() {
                let v = match q {
                    EvalQuantity::Returns => real_block.row(s - 1).iter().copied().collect(),
                    _ => q.decision(&real_chain[s]),
                };
                pools[qi][si].0.push(v);
            }
        }
        for _ in 0..cfg.draws_per_anchor {
            let block = source.block(panel, t, panel.steps(), &mut rng)?;
            let chain = decision_chain(&block, cond, params)?;
            for (qi, &q) in cfg.quantities.iter().enumerate() {
                for (si, &s) in cfg.steps_for(q).iter().enumerate() {
                    let v = match q {
                        EvalQuantity::Returns => block.row(s - 1).iter().copied().collect(),
                        _ => q.decision(&chain[s]),
                    };
                    pools[qi][si].1.push(v);
                }
            }
        }
    }

    let mut report = WassersteinReport::default();
    for (qi, &q) in cfg.quantities.iter().enumerate() {
        for (si, &s) in cfg.steps_for(q).iter().enumerate() {
            let (real, synth) = &pools[qi][si];
            let row = |solver, distance, n_real, n_synth, eps| ReportRow {
                checkpoint_step,
                quantity: q.label().to_string(),
                k: s,
                solver,
                distance,
                n_real,
                n_synth,
                eps,
            };
            if real[0].len() == 1 {
                let a: Vec<f64> = real.iter().map(|v| v[0]).collect();
                let b: Vec<f64> = synth.iter().map(|v| v[0]).collect();
                report
                    .rows
                    .push(row(Solver::Sorted1d, w1_1d(&a, &b)?, a.len(), b.len(), None));
                continue;
            }
            let mut sub = ChaCha8Rng::seed_from_u64(cfg.seed);
            sub.set_stream(1 + (qi * 64 + si) as u64);
            let a = PointCloud::from_rows(real)?.subsample(cfg.lp_cap, &mut sub)?;
            let b = PointCloud::from_rows(synth)?.subsample(cfg.lp_cap, &mut sub)?;
            let exact = w_exact_capped(&a, &b, cfg.lp_cap)?;
            report
                .rows
                .push(row(Solver::Exact, exact.distance, a.len(), b.len(), None));
            if let Some(sk) = &cfg.sinkhorn {
                let r = w_sinkhorn(&a, &b, sk)?;
                report
                    .rows
                    .push(row(Solver::Sinkhorn, r.distance, a.len(), b.len(), Some(r.eps)));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::DecisionParams;
    use crate::markets::{simulate_panel, DgpParams, DEFAULT_WINDOWS};

    fn prepared() -> PreparedPanel {
        let panel = simulate_panel(&DgpParams::default(), 120, 100, 9).unwrap();
        PreparedPanel::new(panel, 4, DEFAULT_WINDOWS, DecisionParams::default()).unwrap()
    }

    #[test]
    fn replay_gives_zero() {
        let p = prepared();
        let r = evaluate(&ReplaySource, &p, None, &EvalConfig::default(), 0).unwrap();
        assert!(!r.rows.is_empty());
        for row in &r.rows {
            match row.solver {
                Solver::Sinkhorn => assert!(row.distance <= row.eps.unwrap(), "{row:?}"),
                _ => assert!(row.distance.abs() < 1e-12, "{row:?}"),
            }
        }
    }

    #[test]
    fn default_step_set() {
        let p = prepared();
        let r = evaluate(&ReplaySource, &p, None, &EvalConfig::default(), 7).unwrap();
        {
            let q = "returns";
            let ks: Vec<usize> = r
                .rows
                .iter()
                .filter(|x| x.quantity == q && x.solver != Solver::Sinkhorn)
                .map(|x| x.k)
                .collect();
            assert_eq!(ks, vec![1, 4]);
        }
        for q in ["precision", "weights", "utility"] {
            let ks: Vec<usize> = r
                .rows
                .iter()
                .filter(|x| x.quantity == q && x.solver != Solver::Sinkhorn)
                .map(|x| x.k)
                .collect();
            assert_eq!(ks, vec![1, 3]);
        }
        assert!(r.rows.iter().all(|x| x.checkpoint_step == 7));
    }

    #[test]
    fn untrained_generator_is_reproducible() {
        let p = prepared();
        let g = GeneratorBank::new(4, 0.1, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let cfg = EvalConfig {
            seed: 5,
            ..EvalConfig::default()
        };
        let a = evaluate(&g, &p, None, &cfg, 0).unwrap();
        let b = evaluate(&g, &p, None, &cfg, 0).unwrap();
        assert_eq!(a, b);
        assert!(a.primary("returns", 1).unwrap() > 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let p = prepared();
        let r = evaluate(&ReplaySource, &p, None, &EvalConfig::default(), 3).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(WassersteinReport::read_csv(&buf[..]).unwrap(), r);
    }

    #[test]
    fn rejects_bad_ranges() {
        let p = prepared();
        let cfg = EvalConfig::default();
        let end = *p.anchors().end();
        assert!(evaluate(&ReplaySource, &p, Some(end + 1..=end + 3), &cfg, 0).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 5..=4;
        assert!(evaluate(&ReplaySource, &p, Some(empty), &cfg, 0).is_err());
    }
}
