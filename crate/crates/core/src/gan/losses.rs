use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::banks::{DiscriminatorBank, GeneratorBank, Noise};
use super::{LossMask, LossTerm, TermKind};
use crate::decision::{chain_backward, decision_chain_taped, DecisionChainOutput, DecisionParams, OutputCotangent};
use crate::error::{Error, Result};
use crate::markets::{BlockSample, ConditioningState};
use crate::nn::Gradients;

/// A block of returns together with the decision chain run on it.
#[derive(Debug, Clone)]
pub struct BlockQuantities {
    /// `K x d`.
    pub returns: DMatrix<f64>,
    /// One entry per step; may be empty when no critic needs it.
    pub chain: Vec<DecisionChainOutput>,
}

impl BlockQuantities {
    /// Runs the chain from the real moving-average state at the anchor.
    pub fn from_block(returns: DMatrix<f64>, cond: &ConditioningState, params: &DecisionParams) -> Result<Self> {
        let (chain, _) = decision_chain_taped(&returns, &cond.ma, params)?;
        Ok(Self { returns, chain })
    }

    pub fn real(sample: &BlockSample) -> Self {
        Self {
            returns: sample.real_block.clone(),
            chain: sample.decision_quantities.clone(),
        }
    }
}

fn term_input(term: &LossTerm, mask: &LossMask, q: &BlockQuantities, x: &[f64]) -> Result<Vec<f64>> {
    let k = term.k - 1;
    if k >= q.returns.nrows() {
        return Err(Error::Dimension {
            context: "block steps for loss term",
            expected: term.k,
            actual: q.returns.nrows(),
        });
    }
    let chain_at = |k: usize| {
        q.chain.get(k).ok_or(Error::Dimension {
            context: "decision chain steps for loss term",
            expected: k + 1,
            actual: q.chain.len(),
        })
    };
    let mut v = Vec::with_capacity(term.input_dim);
    match term.kind {
        TermKind::Returns => v.extend(q.returns.row(k).iter()),
        TermKind::Quantity(dq) => v.extend(dq.extract(chain_at(k)?)),
        TermKind::Single => {
            v.extend(q.returns.row(k).iter());
            let out = chain_at(k)?;
            for dq in &mask.quantities {
                v.extend(dq.extract(out));
            }
        }
    }
    v.extend_from_slice(x);
    if v.len() != term.input_dim {
        return Err(Error::Dimension {
            context: "critic input",
            expected: term.input_dim,
            actual: v.len(),
        });
    }
    Ok(v)
}

/// Splits a critic input gradient into the return-row gradient and chain
/// cotangents of its step.
fn scatter_input_grad(
    term: &LossTerm,
    mask: &LossMask,
    g: &[f64],
    block_grad: &mut DMatrix<f64>,
    cots: &mut [OutputCotangent],
) {
    let d = mask.assets;
    let k = term.k - 1;
    match term.kind {
        TermKind::Returns => {
            for a in 0..d {
                block_grad[(k, a)] += g[a];
            }
        }
        TermKind::Quantity(dq) => dq.accumulate_cotangent(&g[..dq.dim(d)], d, &mut cots[k]),
        TermKind::Single => {
            for a in 0..d {
                block_grad[(k, a)] += g[a];
            }
            let mut off = d;
            for dq in &mask.quantities {
                let w = dq.dim(d);
                dq.accumulate_cotangent(&g[off..off + w], d, &mut cots[k]);
                off += w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermLoss {
    pub name: String,
    pub k: usize,
    pub weight: f64,
    /// Sample mean of the critic on real inputs.
    pub real_mean: f64,
    /// Sample mean of the critic on synthetic inputs.
    pub synth_mean: f64,
    /// `real_mean - synth_mean`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateLosses {
    pub terms: Vec<TermLoss>,
    /// `sum_terms weight * gap`, maximized by the critics.
    pub discriminator_objective: f64,
    /// `-sum_terms weight * synth_mean`, minimized by the generator.
    pub generator_objective: f64,
}

fn check_batch(real: &[BlockQuantities], synth: &[BlockQuantities], conds: &[&ConditioningState]) -> Result<()> {
    if real.len() != synth.len() || real.len() != conds.len() {
        return Err(Error::Dimension {
            context: "real, synthetic and conditioning batch sizes",
            expected: real.len(),
            actual: synth.len().min(conds.len()),
        });
    }
    if real.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    Ok(())
}

fn losses_and_grads(
    disc: &DiscriminatorBank,
    real: &[BlockQuantities],
    synth: &[BlockQuantities],
    conds: &[&ConditioningState],
    want_grads: bool,
) -> Result<(SurrogateLosses, Vec<Gradients>)> {
    check_batch(real, synth, conds)?;
    let mask = disc.mask();
    let n = real.len() as f64;
    let flats: Vec<Vec<f64>> = conds.iter().map(|c| c.flat()).collect();
    let mut terms = Vec::with_capacity(mask.terms.len());
    let mut grads = Vec::new();
    let (mut d_obj, mut g_obj) = (0.0, 0.0);
    for (term, net) in mask.terms.iter().zip(disc.nets()) {
        let mut acc = want_grads.then(|| Gradients::zeros_like(net));
        let (mut real_sum, mut synth_sum) = (0.0, 0.0);
        for ((r, s), x) in real.iter().zip(synth).zip(&flats) {
            for (q, sign) in [(r, 1.0), (s, -1.0)] {
                let input = term_input(term, mask, q, x)?;
                let y = if let Some(acc) = acc.as_mut() {
                    let (y, tape) = net.forward(&input)?;
                    acc.add_scaled(&net.backward(&tape, &[1.0])?, sign * term.weight / n);
                    y[0]
                } else {
                    net.predict(&input)?[0]
                };
                if sign > 0.0 {
                    real_sum += y;
                } else {
                    synth_sum += y;
                }
            }
        }
        let (real_mean, synth_mean) = (real_sum / n, synth_sum / n);
        let gap = real_mean - synth_mean;
        d_obj += term.weight * gap;
        g_obj -= term.weight * synth_mean;
        terms.push(TermLoss {
            name: term.name(),
            k: term.k,
            weight: term.weight,
            real_mean,
            synth_mean,
            gap,
        });
        if let Some(acc) = acc {
            grads.push(acc);
        }
    }
    Ok((
        SurrogateLosses {
            terms,
            discriminator_objective: d_obj,
            generator_objective: g_obj,
        },
        grads,
    ))
}

/// Sample-mean surrogate losses of every critic term.
pub fn surrogate_losses(
    disc: &DiscriminatorBank,
    real: &[BlockQuantities],
    synth: &[BlockQuantities],
    conditioning: &[&ConditioningState],
) -> Result<SurrogateLosses> {
    Ok(losses_and_grads(disc, real, synth, conditioning, false)?.0)
}

/// Losses plus the gradient of the discriminator objective for each critic.
pub(crate) fn discriminator_gradients(
    disc: &DiscriminatorBank,
    real: &[BlockQuantities],
    synth: &[BlockQuantities],
    conditioning: &[&ConditioningState],
) -> Result<(SurrogateLosses, Vec<Gradients>)> {
    losses_and_grads(disc, real, synth, conditioning, true)
}

/// Generator objective `-sum weight * mean D(synthetic)` and its gradient for
/// each asset network. Synthetic decision quantities are computed from the
/// generated block and the real moving-average state at the anchor only.
pub fn generator_objective_and_gradients(
    gen: &GeneratorBank,
    disc: &DiscriminatorBank,
    params: &DecisionParams,
    conditioning: &[&ConditioningState],
    noise: &[Noise],
) -> Result<(f64, Vec<Gradients>, Vec<BlockQuantities>)> {
    if conditioning.len() != noise.len() || noise.is_empty() {
        return Err(Error::Dimension {
            context: "generator batch",
            expected: conditioning.len(),
            actual: noise.len(),
        });
    }
    let mask = disc.mask();
    let n = noise.len() as f64;
    let d = gen.assets();
    let mut acc: Vec<Gradients> = gen.nets().iter().map(Gradients::zeros_like).collect();
    let mut objective = 0.0;
    let mut blocks = Vec::with_capacity(noise.len());
    for (cond, z) in conditioning.iter().zip(noise) {
        let (synth, tapes) = gen.generate_taped(cond, z)?;
        let steps = synth.nrows();
        let (chain, chain_tape) = if mask.has_decision_terms() {
            let (c, t) = decision_chain_taped(&synth, &cond.ma, params)?;
            (c, Some(t))
        } else {
            (Vec::new(), None)
        };
        let q = BlockQuantities { returns: synth, chain };
        let x = cond.flat();
        let mut block_grad = DMatrix::zeros(steps, d);
        let mut cots = vec![OutputCotangent::default(); steps];
        for (term, net) in mask.terms.iter().zip(disc.nets()) {
            let input = term_input(term, mask, &q, &x)?;
            let (y, tape) = net.forward(&input)?;
            objective -= term.weight * y[0] / n;
            let g = net.backward(&tape, &[-term.weight / n])?;
            scatter_input_grad(term, mask, &g.input, &mut block_grad, &mut cots);
        }
        if let Some(t) = &chain_tape {
            block_grad += chain_backward(t, &cots)?;
        }
        gen.accumulate(&tapes, &block_grad, 1.0, &mut acc)?;
        blocks.push(q);
    }
    Ok((objective, acc, blocks))
}
