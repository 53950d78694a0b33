use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use rand::Rng;

use super::features::{ConditioningCache, ConditioningState};
use super::ReturnPanel;
use crate::decision::{decision_chain, DecisionChainOutput, DecisionParams};
use crate::error::{Error, Result};

/// One `K`-step window after anchor `t` with everything computed from it.
#[derive(Debug, Clone)]
pub struct BlockSample {
    pub t: usize,
    /// Panel rows `t+1..=t+K`.
    pub real_block: DMatrix<f64>,
    pub conditioning: ConditioningState,
    /// Decision chain on the real block, one entry per step.
    pub decision_quantities: Vec<DecisionChainOutput>,
}

/// Admissible anchors (0-based rows) for blocks of length `k`: the trailing
/// windows must be full at `t` and rows `t+1..=t+k` must exist.
pub fn anchor_range(panel_len: usize, k: usize, windows: &[usize; 4]) -> Result<RangeInclusive<usize>> {
    let lo = windows.iter().max().copied().unwrap_or(1).saturating_sub(1);
    let available = panel_len.saturating_sub(k + lo);
    if k == 0 || available == 0 {
        return Err(Error::EmptyAnchorRange {
            needed: lo + k + 1,
            available: panel_len,
        });
    }
    Ok(lo..=panel_len - 1 - k)
}

/// `n` anchors drawn independently and uniformly, with replacement.
pub fn sample_anchors<R: Rng + ?Sized>(range: &RangeInclusive<usize>, n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(range.clone())).collect()
}

/// A panel with conditioning states and real-data decision chains cached for
/// every admissible anchor.
#[derive(Debug, Clone)]
pub struct PreparedPanel {
    panel: ReturnPanel,
    k: usize,
    windows: [usize; 4],
    params: DecisionParams,
    range: RangeInclusive<usize>,
    cache: ConditioningCache,
    chains: Vec<Vec<DecisionChainOutput>>,
}

impl PreparedPanel {
    pub fn new(panel: ReturnPanel, k: usize, windows: [usize; 4], params: DecisionParams) -> Result<Self> {
        params.validate()?;
        let range = anchor_range(panel.len(), k, &windows)?;
        let cache = ConditioningCache::new(&panel, &windows, params.zeta)?;
        let mut chains = Vec::with_capacity(range.clone().count());
        for t in range.clone() {
            let block = panel.returns().rows(t + 1, k).into_owned();
            let cond = cache
                .get(t)
                .ok_or_else(|| Error::Internal(format!("no conditioning at {t}")))?;
            chains.push(decision_chain(&block, cond, &params)?);
        }
        Ok(Self {
            panel,
            k,
            windows,
            params,
            range,
            cache,
            chains,
        })
    }

    pub fn panel(&self) -> &ReturnPanel {
        &self.panel
    }

    pub fn steps(&self) -> usize {
        self.k
    }

    pub fn windows(&self) -> &[usize; 4] {
        &self.windows
    }

    pub fn params(&self) -> &DecisionParams {
        &self.params
    }

    pub fn anchors(&self) -> RangeInclusive<usize> {
        self.range.clone()
    }

    fn check(&self, t: usize) -> Result<usize> {
        if !self.range.contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "anchor {t} outside {}..={}",
                self.range.start(),
                self.range.end()
            )));
        }
        Ok(t - self.range.start())
    }

    pub fn conditioning(&self, t: usize) -> Result<&ConditioningState> {
        self.check(t)?;
        self.cache
            .get(t)
            .ok_or_else(|| Error::Internal(format!("no conditioning at {t}")))
    }

    pub fn real_block(&self, t: usize) -> Result<DMatrix<f64>> {
        self.check(t)?;
        Ok(self.panel.returns().rows(t + 1, self.k).into_owned())
    }

    pub fn real_chain(&self, t: usize) -> Result<&[DecisionChainOutput]> {
        let i = self.check(t)?;
        Ok(&self.chains[i])
    }

    pub fn block(&self, t: usize) -> Result<BlockSample> {
        Ok(BlockSample {
            t,
            real_block: self.real_block(t)?,
            conditioning: self.conditioning(t)?.clone(),
            decision_quantities: self.real_chain(t)?.to_vec(),
        })
    }

    /// `n` blocks at uniformly drawn anchors; overlaps and repeats allowed.
    pub fn sample_blocks<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<BlockSample>> {
        sample_anchors(&self.range, n, rng)
            .into_iter()
            .map(|t| self.block(t))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{simulate_panel, DgpParams, DEFAULT_WINDOWS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_anchor_range() {
        // T - K - max(w) + 1 = 1
        let r = anchor_range(25, 4, &DEFAULT_WINDOWS).unwrap();
        assert_eq!(r, 20..=20);
        let a = sample_anchors(&r, 16, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(a.iter().all(|&t| t == 20));
        assert!(matches!(
            anchor_range(24, 4, &DEFAULT_WINDOWS),
            Err(Error::EmptyAnchorRange { .. })
        ));
    }

    #[test]
    fn block_rows_follow_anchor() {
        let panel = simulate_panel(&DgpParams::default(), 80, 100, 1).unwrap();
        let prep = PreparedPanel::new(panel.clone(), 4, DEFAULT_WINDOWS, DecisionParams::default()).unwrap();
        let b = prep.block(33).unwrap();
        for k in 0..4 {
            assert_eq!(b.real_block.row(k), panel.returns().row(34 + k));
        }
        assert_eq!(b.conditioning.t, 33);
        assert_eq!(b.decision_quantities.len(), 4);
    }

    #[test]
    fn duplicates_when_batch_exceeds_range() {
        let r = anchor_range(30, 4, &DEFAULT_WINDOWS).unwrap();
        let a = sample_anchors(&r, 64, &mut ChaCha8Rng::seed_from_u64(4));
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert!(s.len() < a.len());
    }
}
