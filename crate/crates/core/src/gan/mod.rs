//! Decision-aware conditional GAN: per-asset generators, per-term critics,
//! the multi-Wasserstein surrogate losses and the alternating training loop.

mod banks;
mod losses;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decision::{DecisionChainOutput, OutputCotangent};
use crate::error::{Error, Result};
use crate::linalg::upper_triangle;
use crate::markets::FEATURES_PER_ASSET;

pub use banks::{DiscriminatorBank, GeneratorBank, Noise, DISCRIMINATOR_HIDDEN, GENERATOR_HIDDEN, NOISE_DIM};
pub use losses::{generator_objective_and_gradients, surrogate_losses, BlockQuantities, SurrogateLosses, TermLoss};
pub use train::{
    taint, train, RunManifest, TrainCheckpoint, TrainConfig, TrainLog, TrainLogEntry, Trainer, RUN_FORMAT,
};

/// The full model and its four ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Return and utility critics at every step.
    RetUtility,
    /// Return critics only.
    Ret,
    /// Return and utility critics, one step ahead.
    OneStep,
    /// One critic per step on the stacked return and utility.
    Single,
    /// Utility critics only.
    Utility,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::RetUtility,
        Variant::Ret,
        Variant::OneStep,
        Variant::Single,
        Variant::Utility,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::RetUtility => "ret-utility",
            Variant::Ret => "ret",
            Variant::OneStep => "one-step",
            Variant::Single => "single",
            Variant::Utility => "utility",
        }
    }

    /// Look-ahead actually trained for a configured `k`.
    pub fn effective_steps(self, k: usize) -> usize {
        match self {
            Variant::OneStep => 1,
            _ => k,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variant `{s}`")))
    }
}

/// A decision-chain output that can be fed to a critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionQuantity {
    Utility,
    PortfolioReturn,
    Weights,
    Mean,
    /// Upper triangle of the precision estimate.
    Precision,
    /// Upper triangle of the covariance estimate.
    Covariance,
}

impl DecisionQuantity {
    pub fn label(self) -> &'static str {
        match self {
            DecisionQuantity::Utility => "utility",
            DecisionQuantity::PortfolioReturn => "portfolio_return",
            DecisionQuantity::Weights => "weights",
            DecisionQuantity::Mean => "mean",
            DecisionQuantity::Precision => "precision",
            DecisionQuantity::Covariance => "covariance",
        }
    }

    pub fn dim(self, d: usize) -> usize {
        match self {
            DecisionQuantity::Utility | DecisionQuantity::PortfolioReturn => 1,
            DecisionQuantity::Weights | DecisionQuantity::Mean => d,
            DecisionQuantity::Precision | DecisionQuantity::Covariance => d * (d + 1) / 2,
        }
    }

    pub fn extract(self, out: &DecisionChainOutput) -> Vec<f64> {
        match self {
            DecisionQuantity::Utility => vec![out.utility],
            DecisionQuantity::PortfolioReturn => vec![out.p],
            DecisionQuantity::Weights => out.w.as_slice().to_vec(),
            DecisionQuantity::Mean => out.u_hat.as_slice().to_vec(),
            DecisionQuantity::Precision => upper_triangle(&out.h_hat),
            DecisionQuantity::Covariance => upper_triangle(&out.sigma_hat),
        }
    }

    /// Adds the cotangent `g` of the extracted vector into `cot`.
    pub fn accumulate_cotangent(self, g: &[f64], d: usize, cot: &mut OutputCotangent) {
        use nalgebra::{DMatrix, DVector};
        let upper = |g: &[f64]| {
            let mut m = DMatrix::zeros(d, d);
            let mut idx = 0;
            for i in 0..d {
                for j in i..d {
                    m[(i, j)] = g[idx];
                    idx += 1;
                }
            }
            m
        };
        let add_vec = |slot: &mut Option<DVector<f64>>, v: DVector<f64>| {
            *slot = Some(match slot.take() {
                Some(prev) => prev + v,
                None => v,
            });
        };
        let add_mat = |slot: &mut Option<DMatrix<f64>>, m: DMatrix<f64>| {
            *slot = Some(match slot.take() {
                Some(prev) => prev + m,
                None => m,
            });
        };
        match self {
            DecisionQuantity::Utility => cot.utility += g[0],
            DecisionQuantity::PortfolioReturn => cot.p += g[0],
            DecisionQuantity::Weights => add_vec(&mut cot.w, DVector::from_column_slice(g)),
            DecisionQuantity::Mean => add_vec(&mut cot.u_hat, DVector::from_column_slice(g)),
            DecisionQuantity::Precision => add_mat(&mut cot.h_hat, upper(g)),
            DecisionQuantity::Covariance => add_mat(&mut cot.sigma_hat, upper(g)),
        }
    }
}

/// What a critic looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "quantity")]
pub enum TermKind {
    /// The step-`k` return vector.
    Returns,
    /// One decision quantity at step `k`.
    Quantity(DecisionQuantity),
    /// Returns followed by every configured quantity, stacked.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTerm {
    pub kind: TermKind,
    /// 1-based look-ahead step.
    pub k: usize,
    pub weight: f64,
    /// Critic input width: quantity width plus the flattened conditioning.
    pub input_dim: usize,
}

impl LossTerm {
    pub fn name(&self) -> String {
        let kind = match self.kind {
            TermKind::Returns => "returns",
            TermKind::Quantity(q) => q.label(),
            TermKind::Single => "single",
        };
        format!("{kind}_k{}", self.k)
    }
}

/// The loss terms trained by a variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMask {
    pub variant: Variant,
    pub steps: usize,
    pub assets: usize,
    /// Quantities stacked into `Single` critics or given their own critics.
    pub quantities: Vec<DecisionQuantity>,
    pub terms: Vec<LossTerm>,
}

impl LossMask {
    pub fn conditioning_dim(&self) -> usize {
        self.assets * FEATURES_PER_ASSET
    }

    pub fn has_decision_terms(&self) -> bool {
        self.terms.iter().any(|t| !matches!(t.kind, TermKind::Returns))
    }
}

/// Loss-term layout of `variant` for `d` assets and configured look-ahead
/// `k`, with weight `decay^k` on every step-`k` term.
pub fn make_variant(
    variant: Variant,
    k: usize,
    d: usize,
    quantities: &[DecisionQuantity],
    decay: f64,
) -> Result<LossMask> {
    if k == 0 || d == 0 {
        return Err(Error::InvalidParameter("K and d must be >= 1".into()));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "weight decay base must lie in (0,1], got {decay}"
        )));
    }
    let uses_quantities = !matches!(variant, Variant::Ret);
    if uses_quantities && quantities.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "variant {variant} needs at least one decision quantity"
        )));
    }
    let steps = variant.effective_steps(k);
    let cond = d * FEATURES_PER_ASSET;
    let mut terms = Vec::new();
    for step in 1..=steps {
        let weight = decay.powi(step as i32);
        let mut push = |kind: TermKind, width: usize| {
            terms.push(LossTerm {
                kind,
                k: step,
                weight,
                input_dim: width + cond,
            })
        };
        match variant {
            Variant::RetUtility | Variant::OneStep => {
                push(TermKind::Returns, d);
                for &q in quantities {
                    push(TermKind::Quantity(q), q.dim(d));
                }
            }
            Variant::Ret => push(TermKind::Returns, d),
            Variant::Utility => {
                for &q in quantities {
                    push(TermKind::Quantity(q), q.dim(d));
                }
            }
            Variant::Single => {
                let width = d + quantities.iter().map(|q| q.dim(d)).sum::<usize>();
                push(TermKind::Single, width);
            }
        }
    }
    Ok(LossMask {
        variant,
        steps,
        assets: d,
        quantities: if uses_quantities {
            quantities.to_vec()
        } else {
            Vec::new()
        },
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const U: [DecisionQuantity; 1] = [DecisionQuantity::Utility];

    #[test]
    fn ret_has_no_utility_critics() {
        let m = make_variant(Variant::Ret, 4, 4, &U, 0.8).unwrap();
        assert_eq!(m.terms.len(), 4);
        assert!(m.terms.iter().all(|t| t.kind == TermKind::Returns));
        assert!(!m.has_decision_terms());
    }

    #[test]
    fn one_step_forces_single_step() {
        for k in [1, 2, 4, 9] {
            let m = make_variant(Variant::OneStep, k, 4, &U, 0.8).unwrap();
            assert_eq!(m.steps, 1);
            assert!(m.terms.iter().all(|t| t.k == 1));
            assert_eq!(m.terms.len(), 2);
        }
    }

    #[test]
    fn single_input_width() {
        let d = 4;
        let m = make_variant(Variant::Single, 3, d, &U, 0.8).unwrap();
        assert_eq!(m.terms.len(), 3);
        for t in &m.terms {
            assert_eq!(t.input_dim, d + 1 + 5 * d);
        }
    }

    #[test]
    fn weights_follow_schedule() {
        let m = make_variant(Variant::RetUtility, 4, 4, &U, 0.8).unwrap();
        assert_eq!(m.terms.len(), 8);
        for t in &m.terms {
            assert_eq!(t.weight, 0.8f64.powi(t.k as i32));
        }
        let widths: Vec<usize> = m.terms.iter().map(|t| t.input_dim).collect();
        assert_eq!(&widths[..2], &[24, 21]);
    }

    #[test]
    fn variant_labels_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.label().parse::<Variant>().unwrap(), v);
        }
        assert!("gan".parse::<Variant>().is_err());
    }
}
