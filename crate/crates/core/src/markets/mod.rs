//! Market data: return panels, moving-average state, the simulated
//! data-generating process, ETF price ingestion, conditioning features and the
//! overlapped block sampler.

mod dgp;
mod etf;
mod features;
mod mvt;
mod sampler;

pub use dgp::{simulate_panel, simulate_with_noise, DgpParams};
pub use etf::{load_etf_csv, read_panel_csv, write_etf_csv, write_panel_csv, PriceRow};
pub use features::{build_conditioning, ConditioningCache, ConditioningState, DEFAULT_WINDOWS, FEATURES_PER_ASSET};
pub use mvt::{sample_mvt, MvtSpec};
pub use sampler::{anchor_range, sample_anchors, BlockSample, PreparedPanel};

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// `T x d` matrix of simple returns, one row per date.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    returns: DMatrix<f64>,
    dates: Option<Vec<String>>,
}

impl ReturnPanel {
    pub fn new(returns: DMatrix<f64>, dates: Option<Vec<String>>) -> Result<Self> {
        if let Some(d) = &dates {
            if d.len() != returns.nrows() {
                return Err(Error::Dimension {
                    context: "panel dates",
                    expected: returns.nrows(),
                    actual: d.len(),
                });
            }
        }
        if let Some((idx, _)) = returns.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let t = idx % returns.nrows().max(1);
            return Err(Error::NonFinite(format!("panel entry at row {t}")));
        }
        Ok(Self { returns, dates })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension {
                context: "panel row",
                expected: d,
                actual: bad.len(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(rows.len(), d, &flat), None)
    }

    pub fn len(&self) -> usize {
        self.returns.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.nrows() == 0
    }

    pub fn assets(&self) -> usize {
        self.returns.ncols()
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.returns.row(t).transpose()
    }

    pub fn row_view(&self, t: usize) -> RowDVector<f64> {
        self.returns.row(t).into_owned()
    }

    /// Rows `start..end` as a new panel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::InvalidParameter(format!(
                "row range {start}..{end} outside panel of length {}",
                self.len()
            )));
        }
        let returns = self.returns.rows(start, end - start).into_owned();
        let dates = self.dates.as_ref().map(|d| d[start..end].to_vec());
        Self::new(returns, dates)
    }

    /// Rows whose ISO date lies in `[from, to]` (inclusive, lexicographic).
    pub fn date_range(&self, from: &str, to: &str) -> Result<Self> {
        let dates = self
            .dates
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("panel has no dates".into()))?;
        let idx: Vec<usize> = (0..dates.len())
            .filter(|&i| dates[i].as_str() >= from && dates[i].as_str() <= to)
            .collect();
        let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
            return Err(Error::InvalidParameter(format!("no rows between {from} and {to}")));
        };
        self.slice(first, last + 1)
    }

    /// FNV-1a over the raw bits of every entry, row-major.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(&(self.len() as u64).to_le_bytes());
        feed(&(self.assets() as u64).to_le_bytes());
        for t in 0..self.len() {
            for a in 0..self.assets() {
                feed(&self.returns[(t, a)].to_bits().to_le_bytes());
            }
        }
        h
    }
}

/// Exponential moving average `m <- zeta m + (1 - zeta) x`, optionally also of
/// the outer products `x x^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    pub zeta: f64,
    pub mean: DVector<f64>,
    pub second: Option<DMatrix<f64>>,
}

impl EmaState {
    pub fn zeros(zeta: f64, dim: usize, with_second: bool) -> Self {
        Self {
            zeta,
            mean: DVector::zeros(dim),
            second: with_second.then(|| DMatrix::zeros(dim, dim)),
        }
    }

    pub fn update(&mut self, x: &DVector<f64>) {
        let z = self.zeta;
        self.mean = &self.mean * z + x * (1.0 - z);
        if let Some(s) = &mut self.second {
            *s = &*s * z + (x * x.transpose()) * (1.0 - z);
        }
    }

    pub fn updated(&self, x: &DVector<f64>) -> Self {
        let mut next = self.clone();
        next.update(x);
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ema_contracts_to_constant() {
        let c = DVector::from_vec(vec![0.3, -1.2]);
        let mut ema = EmaState::zeros(0.74, 2, true);
        let start_gap = (&ema.mean - &c).norm();
        for n in 1..=40 {
            ema.update(&c);
            let gap = (&ema.mean - &c).norm();
            assert!(gap <= 0.74f64.powi(n) * start_gap + 1e-15);
        }
        let s = ema.second.unwrap();
        assert!((&s - s.transpose()).abs().max() == 0.0);
    }

    #[test]
    fn slice_and_hash() {
        let p = ReturnPanel::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]]).unwrap();
        let s = p.slice(1, 3).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.row(0)[1], 0.4);
        assert_ne!(p.content_hash(), s.content_hash());
        assert_eq!(p.content_hash(), p.clone().content_hash());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(ReturnPanel::from_rows(&[vec![0.1, f64::NAN]]).is_err());
    }
}
