//! Empirical Wasserstein distances between point clouds under the Euclidean
//! ground cost: an exact network-simplex solver, an entropic solver and the
//! sorted 1-D formula, plus the pooled evaluation of a generator.

mod eval;
mod simplex;
mod sinkhorn;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

pub use eval::{
    evaluate, BlockSource, EvalConfig, EvalQuantity, ReplaySource, ReportRow, Solver, WassersteinReport, CSV_HEADER,
};
pub use sinkhorn::{w_sinkhorn, SinkhornConfig, SinkhornResult};

/// Points per side above which the exact solver refuses to run.
pub const DEFAULT_LP_CAP: usize = 512;

/// `n` points in `R^m` with optional masses (uniform when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    masses: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::EmptyCloud);
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point cloud".into()));
        }
        Ok(Self { points, masses: None })
    }

    pub fn with_masses(points: DMatrix<f64>, masses: Vec<f64>) -> Result<Self> {
        let mut c = Self::new(points)?;
        if masses.len() != c.len() {
            return Err(Error::Dimension {
                context: "point masses",
                expected: c.len(),
                actual: masses.len(),
            });
        }
        if masses.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter(
                "point masses must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("point masses sum to {total}, not 1")));
        }
        c.masses = Some(masses);
        Ok(c)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidParameter("point rows have unequal lengths".into()));
        }
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(xs.len(), 1, xs))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn is_uniform(&self) -> bool {
        self.masses.is_none()
    }

    pub fn masses(&self) -> Vec<f64> {
        match &self.masses {
            Some(m) => m.clone(),
            None => vec![1.0 / self.len() as f64; self.len()],
        }
    }

    /// `n` distinct points chosen uniformly; masses are renormalized.
    pub fn subsample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Self> {
        if n >= self.len() {
            return Ok(self.clone());
        }
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        let mut idx = sample(rng, self.len(), n).into_vec();
        idx.sort_unstable();
        let points = self.points.select_rows(idx.iter());
        match &self.masses {
            None => Self::new(points),
            Some(m) => {
                let w: Vec<f64> = idx.iter().map(|&i| m[i]).collect();
                let total: f64 = w.iter().sum();
                if total <= 0.0 {
                    return Err(Error::InvalidParameter("subsample carries no mass".into()));
                }
                Self::with_masses(points, w.iter().map(|v| v / total).collect())
            }
        }
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                context: "point cloud dimension",
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }
}

/// Row-major Euclidean distances, `c[i * nb + j] = |a_i - b_j|`.
pub fn cost_matrix(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let (na, nb, m) = (a.len(), b.len(), a.dim());
    let mut c = Vec::with_capacity(na * nb);
    for i in 0..na {
        for j in 0..nb {
            let mut s = 0.0;
            for k in 0..m {
                let d = a.points[(i, k)] - b.points[(j, k)];
                s += d * d;
            }
            c.push(s.sqrt());
        }
    }
    c
}

pub(crate) fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    let mid = s.len() / 2;
    let (_, m, _) = s.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Optimal plan with certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTransport {
    pub distance: f64,
    /// `na x nb` optimal plan.
    pub plan: DMatrix<f64>,
    /// Dual potentials with `f_i + g_j <= c_ij`.
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `sum_i a_i f_i + sum_j b_j g_j`.
    pub dual_objective: f64,
    pub pivots: usize,
}

impl ExactTransport {
    pub fn duality_gap(&self) -> f64 {
        (self.distance - self.dual_objective).abs()
    }
}

/// Exact transport under the default cap.
pub fn w_exact(a: &PointCloud, b: &PointCloud) -> Result<ExactTransport> {
    w_exact_capped(a, b, DEFAULT_LP_CAP)
}

pub fn w_exact_capped(a: &PointCloud, b: &PointCloud, cap: usize) -> Result<ExactTransport> {
    a.check_compatible(b)?;
    if a.len() > cap || b.len() > cap {
        return Err(Error::CapExceeded {
            rows: a.len(),
            cols: b.len(),
            cap,
        });
    }
    let c = cost_matrix(a, b);
    solve_transport(&c, &a.masses(), &b.masses(), a.is_uniform() && b.is_uniform())
}

/// Exact transport for a row-major cost matrix and marginals `wa`, `wb`.
/// With `uniform` set the supplies are scaled to integers so every pivot is
/// exact.
pub fn solve_transport(cost: &[f64], wa: &[f64], wb: &[f64], uniform: bool) -> Result<ExactTransport> {
    let (na, nb) = (wa.len(), wb.len());
    if na == 0 || nb == 0 {
        return Err(Error::EmptyCloud);
    }
    if cost.len() != na * nb {
        return Err(Error::Dimension {
            context: "transport cost matrix",
            expected: na * nb,
            actual: cost.len(),
        });
    }
    let (supply, scale): (Vec<f64>, f64) = if uniform {
        let s = (0..na)
            .map(|_| nb as f64)
            .chain((0..nb).map(|_| -(na as f64)))
            .collect();
        (s, (na * nb) as f64)
    } else {
        let sa: f64 = wa.iter().sum();
        let sb: f64 = wb.iter().sum();
        if (sa - sb).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "marginals carry unequal mass {sa} and {sb}"
            )));
        }
        let mut s: Vec<f64> = wa.iter().copied().chain(wb.iter().map(|v| -v)).collect();
        // absorb rounding in the last sink
        let drift: f64 = s.iter().sum();
        s[na + nb - 1] -= drift;
        (s, 1.0)
    };
    let sol = simplex::network_simplex(cost, na, nb, &supply)?;
    let plan = DMatrix::from_fn(na, nb, |i, j| sol.flow[i * nb + j] / scale);
    let distance = (0..na * nb).map(|e| cost[e] * sol.flow[e] / scale).sum::<f64>();
    let f: Vec<f64> = sol.pi[..na].iter().map(|p| -p).collect();
    let g: Vec<f64> = sol.pi[na..].to_vec();
    let dual_objective =
        wa.iter().zip(&f).map(|(w, v)| w * v).sum::<f64>() + wb.iter().zip(&g).map(|(w, v)| w * v).sum::<f64>();
    Ok(ExactTransport {
        distance,
        plan,
        f,
        g,
        dual_objective,
        pivots: sol.pivots,
    })
}

/// Mean absolute difference of the sorted samples: exact `W_1` between two
/// uniform empirical measures of equal size.
pub fn w1_sorted(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if a.len() != b.len() {
        return Err(Error::Dimension {
            context: "w1_sorted sample counts",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    Ok(x.iter().zip(&y).map(|(u, v)| (u - v).abs()).sum::<f64>() / x.len() as f64)
}

/// Exact `W_1` between uniform empirical measures of any sizes, as the
/// integral of the absolute difference of the two distribution functions.
pub fn w1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("1-d sample".into()));
    }
    if a.len() == b.len() {
        return w1_sorted(a, b);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = x[0].min(y[0]);
    let mut total = 0.0;
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        let gap = (i as f64 / na - j as f64 / nb).abs();
        total += gap * (next - prev);
        while i < x.len() && x[i] == next {
            i += 1;
        }
        while j < y.len() && y[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_instance() {
        let c = [1.0, 2.0, 3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 1.0];
        let w = [1.0 / 3.0; 3];
        let t = solve_transport(&c, &w, &w, true).unwrap();
        assert!((t.distance - 1.0).abs() < 1e-12);
        for i in 0..3 {
            assert!((t.plan[(i, i)] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(t.duality_gap() < 1e-12);
    }

    #[test]
    fn sorted_examples() {
        assert_eq!(w1_sorted(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(w1_sorted(&[3.0, -1.0], &[3.0, -1.0]).unwrap(), 0.0);
        let a = [0.3, -2.0, 5.0];
        let b: Vec<f64> = a.iter().map(|v| v + 1.5).collect();
        assert!((w1_sorted(&a, &b).unwrap() - 1.5).abs() < 1e-15);
        assert!(w1_sorted(&[], &[]).is_err());
        assert!(w1_sorted(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cdf_integral_matches_lp_for_unequal_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (na, nb) in [(3, 5), (7, 2), (10, 13)] {
            let a: Vec<f64> = (0..na).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let b: Vec<f64> = (0..nb).map(|_| rng.random::<f64>() * 3.0).collect();
            let lp = w_exact(
                &PointCloud::from_scalars(&a).unwrap(),
                &PointCloud::from_scalars(&b).unwrap(),
            )
            .unwrap();
            assert!((w1_1d(&a, &b).unwrap() - lp.distance).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_clouds_are_diagonal() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let a = PointCloud::from_rows(&rows).unwrap();
        let t = w_exact(&a, &a).unwrap();
        assert_eq!(t.distance, 0.0);
        for i in 0..5 {
            assert!((t.plan[(i, i)] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_masses() {
        let a = PointCloud::with_masses(DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), vec![0.25, 0.75]).unwrap();
        let b = PointCloud::from_scalars(&[0.0]).unwrap();
        let t = w_exact(&a, &b).unwrap();
        assert!((t.distance - 0.75).abs() < 1e-12);
        assert!(t.duality_gap() < 1e-12);
        assert!(PointCloud::with_masses(DMatrix::zeros(2, 1), vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let a = PointCloud::from_scalars(&[0.0; 4]).unwrap();
        assert!(matches!(w_exact_capped(&a, &a, 3), Err(Error::CapExceeded { .. })));
        assert!(PointCloud::from_scalars(&[]).is_err());
    }
}
