//! Boundedness constants of the decision chain and the generalization-bound
//! calculator for overlapped block sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Caps on every decision-chain output when all returns satisfy
/// `|r_i| <= b_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainCaps {
    pub b_r: f64,
    /// `lambda_max(H) <= 1 / tau`.
    pub precision_max_eig: f64,
    /// `lambda_min(H) >= 1 / (sqrt((1 - tau)^2 b_r^2 + tau^2) d)`, the
    /// Frobenius-norm argument.
    pub precision_min_eig: f64,
    /// `lambda_min(H) >= 1 / ((1 - tau) d b_r^2 + tau)`, which also covers
    /// degenerate covariance estimates whose top eigenvalue reaches `d b_r^2`.
    pub precision_min_eig_strict: f64,
    /// `|u_i| <= b_r`.
    pub u_hat_abs: f64,
    /// `|sigma_ij| <= 2 b_r^2`.
    pub sigma_entry_abs: f64,
    /// Budget multiplier of the weight formula.
    pub lambda_abs: f64,
    /// Euclidean norm of the weights.
    pub w_norm: f64,
    pub p_abs: f64,
    pub utility_abs: f64,
}

pub fn chain_caps(b_r: f64, tau: f64, phi: f64, d: usize) -> Result<ChainCaps> {
    if !(b_r > 0.0 && b_r.is_finite()) {
        return Err(Error::InvalidParameter(format!("b_r must be > 0, got {b_r}")));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0,1), got {tau}")));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::InvalidParameter(format!("phi must be > 0, got {phi}")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    let df = d as f64;
    let h_max = 1.0 / tau;
    let h_min = 1.0 / (((1.0 - tau).powi(2) * b_r * b_r + tau * tau).sqrt() * df);
    let h_min_strict = 1.0 / ((1.0 - tau) * df * b_r * b_r + tau);
    let lo = h_min.min(h_min_strict);

    // |1^T H u| <= d b_r / tau, 1^T H 1 >= d lambda_min(H).
    let lambda_abs = (df * b_r * h_max + 2.0 * phi) / (df * lo);
    let w_norm = h_max * (df.sqrt() * b_r + df.sqrt() * lambda_abs) / (2.0 * phi);
    let p_abs = w_norm * df.sqrt() * b_r;
    Ok(ChainCaps {
        b_r,
        precision_max_eig: h_max,
        precision_min_eig: h_min,
        precision_min_eig_strict: h_min_strict,
        u_hat_abs: b_r,
        sigma_entry_abs: 2.0 * b_r * b_r,
        lambda_abs,
        w_norm,
        p_abs,
        utility_abs: p_abs + phi * p_abs * p_abs,
    })
}

/// Inputs of the tail bound. `b_r`, `tau`, `phi` and `d` only matter when
/// `b_f` is derived from the decision chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundInputs {
    pub b_r: f64,
    pub b_x: f64,
    pub b_f: f64,
    pub tau: f64,
    pub phi: f64,
    pub d: usize,
    /// Block length.
    pub k: f64,
    /// Summed mixing mass.
    pub delta_beta: f64,
    /// Parameter-Lipschitz constant.
    pub l: f64,
    /// Input-Lipschitz constant.
    pub l_tilde: f64,
    /// Discriminator parameter count.
    pub p: f64,
    /// Sample count.
    pub i: f64,
    /// Iteration count.
    pub m: f64,
    pub eps: f64,
    /// Universal constant.
    pub c: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            b_r: 1.0,
            b_x: 1.0,
            b_f: 1.0,
            tau: 0.01,
            phi: 1.0,
            d: 4,
            k: 4.0,
            delta_beta: 1.0,
            l: 1.0,
            l_tilde: 1.0,
            p: 100.0,
            i: 1e6,
            m: 10.0,
            eps: 0.1,
            c: 1.0,
        }
    }
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("b_x", self.b_x),
            ("b_f", self.b_f),
            ("k", self.k),
            ("l", self.l),
            ("l_tilde", self.l_tilde),
            ("p", self.p),
            ("i", self.i),
            ("eps", self.eps),
            ("c", self.c),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        for (name, v) in [("m", self.m), ("delta_beta", self.delta_beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Same inputs with `b_f` set to the utility cap of [`chain_caps`].
    pub fn with_utility_support(mut self) -> Result<Self> {
        self.b_f = chain_caps(self.b_r, self.tau, self.phi, self.d)?.utility_abs;
        Ok(self)
    }

    /// `ln B_* = ln sqrt(b_f^2 + b_x^2) + ln(K + delta_beta)`.
    pub fn ln_b_star(&self) -> f64 {
        self.b_f.hypot(self.b_x).ln() + (self.k + self.delta_beta).ln()
    }
}

/// Natural log of `C (pL/eps)^p (1 + M) exp(-I eps^2 / (L~^2 B_*^2))`, before
/// clamping. May be `-inf` when the exponential term dominates.
pub fn tail_log_failure(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let x = inputs;
    let net = x.p * (x.p.ln() + x.l.ln() - x.eps.ln());
    let iters = x.m.ln_1p();
    let ln_decay = x.i.ln() + 2.0 * x.eps.ln() - 2.0 * x.l_tilde.ln() - 2.0 * x.ln_b_star();
    let decay = ln_decay.exp();
    let out = x.c.ln() + net + iters - decay;
    if out.is_nan() || out == f64::INFINITY {
        return Err(Error::NonFinite(format!("log failure bound evaluated to {out}")));
    }
    Ok(out)
}

/// Failure probability bound clamped to `[0, 1]`.
pub fn tail_failure_prob(inputs: &BoundInputs) -> Result<f64> {
    Ok(tail_log_failure(inputs)?.min(0.0).exp())
}

/// Smallest integer sample count whose failure bound is at most `delta`.
pub fn required_samples(inputs: &BoundInputs, delta: f64) -> Result<u64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0,1], got {delta}")));
    }
    let at = |i: u64| -> Result<f64> {
        let mut x = *inputs;
        x.i = i as f64;
        tail_failure_prob(&x)
    };
    const LIMIT: u64 = 1 << 53;
    if at(1)? <= delta {
        return Ok(1);
    }
    let mut hi = 2u64;
    while at(hi)? > delta {
        if hi >= LIMIT {
            return Err(Error::InvalidParameter(format!(
                "no sample count up to 2^53 reaches failure bound {delta}"
            )));
        }
        hi = (hi * 2).min(LIMIT);
    }
    let mut lo = hi / 2; // at(lo) > delta
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if at(mid)? <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingNorm {
    /// `min(n, K + delta_beta)`.
    pub bound: f64,
    /// Largest row sum of the dependence matrix of `n` overlapping blocks.
    pub exact_row_max: f64,
    pub delta_beta: f64,
}

/// `beta[j - 1]` is the mixing coefficient at lag `j`; lags past the grid are
/// taken as zero.
pub fn mixing_matrix_norm(beta: &[f64], n: usize, k: usize) -> Result<MixingNorm> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter("n and K must be >= 1".into()));
    }
    if let Some(b) = beta.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "mixing coefficient {b} is not a finite non-negative value"
        )));
    }
    let delta_beta: f64 = beta.iter().sum();
    let entry = |off: usize| -> f64 {
        if off < k {
            1.0
        } else {
            beta.get(off - k).copied().unwrap_or(0.0).min(1.0)
        }
    };
    // Row i sums entries at offsets 1..n-i; the first row is the largest.
    let exact_row_max = 1.0 + (1..n).map(entry).sum::<f64>();
    Ok(MixingNorm {
        bound: (n as f64).min(k as f64 + delta_beta),
        exact_row_max,
        delta_beta,
    })
}

/// Closed-form variant. Terms are summed until they fall below `tol` relative
/// to the running total, for at most `max_terms` lags.
pub fn mixing_matrix_norm_fn<F: Fn(usize) -> f64>(
    beta: F,
    n: usize,
    k: usize,
    tol: f64,
    max_terms: usize,
) -> Result<MixingNorm> {
    let mut grid = Vec::new();
    let mut total = 0.0;
    for j in 1..=max_terms {
        let b = beta(j);
        grid.push(b);
        total += b;
        if b <= tol * total.max(f64::MIN_POSITIVE) && j >= n {
            return mixing_matrix_norm(&grid, n, k);
        }
        if b == 0.0 && j >= n {
            return mixing_matrix_norm(&grid, n, k);
        }
    }
    Err(Error::InvalidParameter(format!(
        "mixing tail not summable within {max_terms} terms (partial sum {total})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_caps() {
        let b = chain_caps(1.0, 0.01, 1.0, 4).unwrap();
        assert!((b.precision_max_eig - 100.0).abs() < 1e-12);
        assert!((b.precision_min_eig - 1.0 / (0.9802f64.sqrt() * 4.0)).abs() < 1e-15);
        assert!((b.precision_min_eig - 0.2525).abs() < 1e-4);
    }

    #[test]
    fn factor_of_iterations() {
        let x = BoundInputs {
            i: 1e5,
            p: 2.0,
            ..BoundInputs::default()
        };
        let a = tail_log_failure(&x).unwrap();
        let b = tail_log_failure(&BoundInputs { m: 20.0, ..x }).unwrap();
        assert!(((b - a).exp() - 21.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn vacuous_target() {
        assert_eq!(required_samples(&BoundInputs::default(), 1.0).unwrap(), 1);
    }

    #[test]
    fn iid_single_step() {
        let m = mixing_matrix_norm(&[0.0; 10], 50, 1).unwrap();
        assert_eq!(m.bound, 1.0);
        assert_eq!(m.exact_row_max, 1.0);
    }

    #[test]
    fn geometric_tail() {
        let m = mixing_matrix_norm_fn(|k| 0.5f64.powi(k as i32), 1000, 4, 1e-18, 10_000).unwrap();
        assert!((m.bound - 5.0).abs() < 1e-12);
        assert!(m.exact_row_max <= m.bound + 1e-12);
    }

    #[test]
    fn divergent_tail_reported() {
        assert!(mixing_matrix_norm_fn(|_| 1.0, 10, 2, 1e-12, 500).is_err());
    }
}
