use nalgebra::DMatrix;

use super::{EmaState, ReturnPanel};
use crate::error::{Error, Result};

/// Trailing-mean windows of the four rolling features, in days.
pub const DEFAULT_WINDOWS: [usize; 4] = [2, 5, 10, 21];

pub const FEATURES_PER_ASSET: usize = 5;

/// Conditioning information at anchor `t`: per asset the last return and four
/// trailing means, plus the estimator moving-average state after row `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningState {
    pub t: usize,
    /// `d x 5`.
    pub features: DMatrix<f64>,
    pub ma: EmaState,
}

impl ConditioningState {
    pub fn assets(&self) -> usize {
        self.features.nrows()
    }

    /// Features of one asset, the generator's conditioning input.
    pub fn asset_features(&self, asset: usize) -> [f64; FEATURES_PER_ASSET] {
        let mut out = [0.0; FEATURES_PER_ASSET];
        for (j, v) in out.iter_mut().enumerate() {
            *v = self.features[(asset, j)];
        }
        out
    }

    /// Asset-major flattening, the discriminators' conditioning input.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.features.len());
        for a in 0..self.features.nrows() {
            out.extend_from_slice(&self.asset_features(a));
        }
        out
    }

    pub fn flat_dim(&self) -> usize {
        self.features.len()
    }
}

fn min_anchor(windows: &[usize; 4]) -> Result<usize> {
    let w = *windows.iter().max().unwrap();
    if windows.contains(&0) {
        return Err(Error::InvalidParameter("rolling windows must be >= 1".into()));
    }
    Ok(w - 1)
}

fn features_at(panel: &ReturnPanel, t: usize, windows: &[usize; 4]) -> DMatrix<f64> {
    let d = panel.assets();
    let r = panel.returns();
    let mut f = DMatrix::zeros(d, FEATURES_PER_ASSET);
    for a in 0..d {
        f[(a, 0)] = r[(t, a)];
        for (j, &w) in windows.iter().enumerate() {
            let sum: f64 = (t + 1 - w..=t).map(|s| r[(s, a)]).sum();
            f[(a, j + 1)] = sum / w as f64;
        }
    }
    f
}

/// Conditioning state at row `t` (0-based); requires `t + 1 >= max(windows)`
/// so every trailing window is full. The moving average runs from a zero state
/// at the start of the panel through row `t` inclusive.
pub fn build_conditioning(panel: &ReturnPanel, t: usize, windows: &[usize; 4], zeta: f64) -> Result<ConditioningState> {
    let lo = min_anchor(windows)?;
    if t < lo || t >= panel.len() {
        return Err(Error::InvalidParameter(format!(
            "anchor {t} outside [{lo}, {}) for windows {windows:?}",
            panel.len()
        )));
    }
    let mut ma = EmaState::zeros(zeta, panel.assets(), true);
    for s in 0..=t {
        ma.update(&panel.row(s));
    }
    Ok(ConditioningState {
        t,
        features: features_at(panel, t, windows),
        ma,
    })
}

/// Conditioning states for every admissible row, computed in one pass.
#[derive(Debug, Clone)]
pub struct ConditioningCache {
    first: usize,
    states: Vec<ConditioningState>,
}

impl ConditioningCache {
    pub fn new(panel: &ReturnPanel, windows: &[usize; 4], zeta: f64) -> Result<Self> {
        let first = min_anchor(windows)?;
        let mut ma = EmaState::zeros(zeta, panel.assets(), true);
        let mut states = Vec::with_capacity(panel.len().saturating_sub(first));
        for t in 0..panel.len() {
            ma.update(&panel.row(t));
            if t >= first {
                states.push(ConditioningState {
                    t,
                    features: features_at(panel, t, windows),
                    ma: ma.clone(),
                });
            }
        }
        Ok(Self { first, states })
    }

    pub fn first_row(&self) -> usize {
        self.first
    }

    pub fn get(&self, t: usize) -> Option<&ConditioningState> {
        t.checked_sub(self.first).and_then(|i| self.states.get(i))
    }
}
