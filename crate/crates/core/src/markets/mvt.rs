use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky;

/// Multivariate Student-t with location, shape matrix and degrees of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MvtSpec {
    pub location: Vec<f64>,
    pub shape: Vec<Vec<f64>>,
    pub dof: f64,
}

impl Default for MvtSpec {
    fn default() -> Self {
        Self::market_default(4)
    }
}

impl MvtSpec {
    /// Zero location, tridiagonal shape (1 on the diagonal, 0.6 next to it),
    /// 100 degrees of freedom.
    pub fn market_default(d: usize) -> Self {
        let shape = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| match i.abs_diff(j) {
                        0 => 1.0,
                        1 => 0.6,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        Self {
            location: vec![0.0; d],
            shape,
            dof: 100.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    pub fn location_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.location.clone())
    }

    pub fn shape_matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if self.shape.len() != d || self.shape.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension {
                context: "t shape matrix",
                expected: d,
                actual: self.shape.len(),
            });
        }
        let flat: Vec<f64> = self.shape.iter().flatten().copied().collect();
        let m = DMatrix::from_row_slice(d, d, &flat);
        if (&m - m.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidParameter("t shape matrix is not symmetric".into()));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dof > 0.0) {
            return Err(Error::InvalidParameter(format!("dof must be > 0, got {}", self.dof)));
        }
        cholesky(&self.shape_matrix()?)?;
        Ok(())
    }
}

/// Reusable sampler: `mu + L z sqrt(nu / chi2_nu)`, `L = chol(shape)`.
pub(crate) struct MvtSampler {
    location: DVector<f64>,
    chol: DMatrix<f64>,
    chi2: ChiSquared<f64>,
    dof: f64,
}

impl MvtSampler {
    pub(crate) fn new(spec: &MvtSpec) -> Result<Self> {
        spec.validate()?;
        let chi2 = ChiSquared::new(spec.dof).map_err(|e| Error::InvalidParameter(format!("chi-square dof: {e}")))?;
        Ok(Self {
            location: spec.location_vector(),
            chol: cholesky(&spec.shape_matrix()?)?,
            chi2,
            dof: spec.dof,
        })
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.location.len();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w: f64 = self.chi2.sample(rng);
        let scale = (self.dof / w).sqrt();
        &self.location + (&self.chol * z) * scale
    }
}

/// `n x d` matrix of independent multivariate-t draws.
pub fn sample_mvt<R: Rng + ?Sized>(spec: &MvtSpec, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let sampler = MvtSampler::new(spec)?;
    let d = spec.dim();
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        let x = sampler.draw(rng);
        out.set_row(i, &x.transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows() as f64;
        let mean = x.row_mean();
        let mut c = DMatrix::zeros(x.ncols(), x.ncols());
        for row in x.row_iter() {
            let dv = (row - &mean).transpose();
            c += &dv * dv.transpose();
        }
        c / (n - 1.0)
    }

    #[test]
    fn default_shape_is_tridiagonal() {
        let s = MvtSpec::market_default(4).shape_matrix().unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.6, 0.0, 0.0, 0.6, 1.0, 0.6, 0.0, 0.0, 0.6, 1.0, 0.6, 0.0, 0.0, 0.6, 1.0,
            ],
        );
        assert_eq!(s, expected);
    }

    #[test]
    fn non_spd_shape_names_minor() {
        let mut spec = MvtSpec::market_default(3);
        spec.shape = vec![vec![1.0, 0.9, 0.0], vec![0.9, 1.0, 0.9], vec![0.0, 0.9, 1.0]];
        match sample_mvt(&spec, 10, &mut ChaCha8Rng::seed_from_u64(0)) {
            Err(Error::NotPositiveDefinite { minor }) => assert_eq!(minor, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn near_gaussian_limit_matches_shape() {
        let mut spec = MvtSpec::market_default(4);
        spec.dof = 1e6;
        let x = sample_mvt(&spec, 200_000, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let c = sample_cov(&x);
        let s = spec.shape_matrix().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if s[(i, j)] != 0.0 {
                    let rel = (c[(i, j)] - s[(i, j)]).abs() / s[(i, j)];
                    assert!(rel < 0.05, "({i},{j}) {} vs {}", c[(i, j)], s[(i, j)]);
                } else {
                    assert!(c[(i, j)].abs() < 0.02);
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = MvtSpec::market_default(4);
        let a = sample_mvt(&spec, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_mvt(&spec, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }
}
