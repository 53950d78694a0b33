use serde::{Deserialize, Serialize};

use super::{cost_matrix, median, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinkhornConfig {
    /// Absolute regularization; when unset, `eps_frac` times the median cost.
    pub eps: Option<f64>,
    pub eps_frac: f64,
    /// Iteration budget of the final stage.
    pub max_iter: usize,
    /// Target L1 marginal violation before rounding.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            eps: None,
            eps_frac: 0.05,
            max_iter: 5_000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    /// Unregularized cost of the rounded, exactly feasible plan.
    pub distance: f64,
    pub eps: f64,
    pub iterations: usize,
    /// L1 marginal violation of the scaled plan before rounding.
    pub marginal_error: f64,
    pub converged: bool,
}

fn lse(vals: impl Iterator<Item = f64>, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(vals);
    let mx = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + buf.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}

/// Entropic optimal transport in the log domain with geometric
/// epsilon-scaling, followed by rounding onto the transport polytope.
pub fn w_sinkhorn(a: &PointCloud, b: &PointCloud, cfg: &SinkhornConfig) -> Result<SinkhornResult> {
    a.check_compatible(b)?;
    let (na, nb) = (a.len(), b.len());
    let c = cost_matrix(a, b);
    let eps = match cfg.eps {
        Some(e) => e,
        None => cfg.eps_frac * median(&c),
    };
    if !(eps > 0.0 && eps.is_finite()) {
        if cfg.eps.is_none() && c.iter().all(|&v| v == 0.0) {
            return Ok(SinkhornResult {
                distance: 0.0,
                eps: 0.0,
                iterations: 0,
                marginal_error: 0.0,
                converged: true,
            });
        }
        return Err(Error::InvalidParameter(format!("sinkhorn eps must be > 0, got {eps}")));
    }
    if cfg.max_iter == 0 || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter(
            "sinkhorn needs max_iter >= 1 and tol > 0".into(),
        ));
    }
    let wa = a.masses();
    let wb = b.masses();
    let la: Vec<f64> = wa.iter().map(|v| v.ln()).collect();
    let lb: Vec<f64> = wb.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0; na];
    let mut g = vec![0.0; nb];
    let mut buf = Vec::with_capacity(na.max(nb));

    let c_max = c.iter().copied().fold(0.0, f64::max);
    let mut stages = Vec::new();
    let mut e = eps;
    while e < c_max {
        stages.push(e);
        e *= 2.0;
    }
    stages.reverse();
    if stages.is_empty() {
        stages.push(eps);
    }

    let mut iterations = 0;
    let mut err = f64::INFINITY;
    let last = stages.len() - 1;
    for (s, &e) in stages.iter().enumerate() {
        let (budget, target) = if s == last {
            (cfg.max_iter, cfg.tol)
        } else {
            (cfg.max_iter.min(100), cfg.tol.max(1e-4))
        };
        for _ in 0..budget {
            for i in 0..na {
                let row = &c[i * nb..(i + 1) * nb];
                f[i] = -e * lse((0..nb).map(|j| lb[j] + (g[j] - row[j]) / e), &mut buf);
            }
            for j in 0..nb {
                g[j] = -e * lse((0..na).map(|i| la[i] + (f[i] - c[i * nb + j]) / e), &mut buf);
            }
            iterations += 1;
            if iterations % 10 != 0 {
                continue;
            }
            // Columns are exact after the g update; measure the rows.
            err = 0.0;
            for i in 0..na {
                let row = &c[i * nb..(i + 1) * nb];
                let r: f64 = (0..nb)
                    .map(|j| (la[i] + lb[j] + (f[i] + g[j] - row[j]) / e).exp())
                    .sum();
                err += (r - wa[i]).abs();
            }
            if err <= target {
                break;
            }
        }
    }

    let mut plan = vec![0.0; na * nb];
    for i in 0..na {
        for j in 0..nb {
            plan[i * nb + j] = (la[i] + lb[j] + (f[i] + g[j] - c[i * nb + j]) / eps).exp();
        }
    }
    round_to_polytope(&mut plan, &wa, &wb);
    let distance = plan.iter().zip(&c).map(|(p, c)| p * c).sum::<f64>().max(0.0);
    Ok(SinkhornResult {
        distance,
        eps,
        iterations,
        marginal_error: err,
        converged: err <= cfg.tol,
    })
}

/// Projects a nonnegative matrix onto the plans with marginals `a`, `b`:
/// shrink rows, shrink columns, then add the rank-one correction.
fn round_to_polytope(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (na, nb) = (a.len(), b.len());
    for i in 0..na {
        let row = &mut plan[i * nb..(i + 1) * nb];
        let r: f64 = row.iter().sum();
        if r > a[i] {
            let s = a[i] / r;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }
    for j in 0..nb {
        let col: f64 = (0..na).map(|i| plan[i * nb + j]).sum();
        if col > b[j] {
            let s = b[j] / col;
            for i in 0..na {
                plan[i * nb + j] *= s;
            }
        }
    }
    let err_r: Vec<f64> = (0..na)
        .map(|i| (a[i] - plan[i * nb..(i + 1) * nb].iter().sum::<f64>()).max(0.0))
        .collect();
    let err_c: Vec<f64> = (0..nb)
        .map(|j| (b[j] - (0..na).map(|i| plan[i * nb + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for i in 0..na {
            for j in 0..nb {
                plan[i * nb + j] += err_r[i] * err_c[j] / total;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_restores_marginals() {
        let a = [0.5, 0.5];
        let b = [0.25, 0.75];
        let mut p = vec![0.4, 0.3, 0.01, 0.2];
        round_to_polytope(&mut p, &a, &b);
        assert!((p[0] + p[1] - 0.5).abs() < 1e-15);
        assert!((p[2] + p[3] - 0.5).abs() < 1e-15);
        assert!((p[0] + p[2] - 0.25).abs() < 1e-15);
        assert!((p[1] + p[3] - 0.75).abs() < 1e-15);
        assert!(p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn rejects_bad_eps() {
        let a = PointCloud::from_scalars(&[0.0, 1.0]).unwrap();
        let cfg = SinkhornConfig {
            eps: Some(0.0),
            ..SinkhornConfig::default()
        };
        assert!(w_sinkhorn(&a, &a, &cfg).is_err());
    }
}
