//! The mean-variance portfolio decision chain and its reverse-mode gradient.
//!
//! For an anchor `t` and look-ahead step `k` the chain computes, from the
//! moving-average state at `t` and the first `k - 1` block returns,
//!
//! * `u_hat` and `sigma_hat`, the moving-average mean and covariance,
//! * `h_hat = ((1 - tau) sigma_hat + tau I)^{-1}`,
//! * the mean-variance weights `w` under the budget `w^T 1 = 1`,
//!
//! and then realizes `p = w^T r_{t+k}` and `U = p - phi p^2` on the `k`-th
//! return. The same code runs on real and generated blocks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetrize};
use crate::markets::{ConditioningState, EmaState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFormula {
    /// `w = H (u - lambda 1) / (2 phi)`, the exact constrained maximizer.
    #[default]
    Kkt,
    /// The closed form as printed in the original write-up; four times the
    /// KKT solution, so `w^T 1 = 4`. Kept for comparison only.
    PrintedClosedForm,
}

impl WeightFormula {
    fn scale(self, phi: f64) -> f64 {
        match self {
            WeightFormula::Kkt => 1.0 / (2.0 * phi),
            WeightFormula::PrintedClosedForm => 2.0 / phi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecisionParams {
    /// Risk preference.
    pub phi: f64,
    /// Shrinkage weight towards the identity.
    pub tau: f64,
    /// Estimator smoothing.
    pub zeta: f64,
    pub formula: WeightFormula,
}

impl Default for DecisionParams {
    fn default() -> Self {
        Self {
            phi: 1.0,
            tau: 0.01,
            zeta: 0.74,
            formula: WeightFormula::Kkt,
        }
    }
}

impl DecisionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi must be > 0, got {}", self.phi)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in (0,1), got {}",
                self.tau
            )));
        }
        if !(self.zeta >= 0.0 && self.zeta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "zeta must lie in [0,1), got {}",
                self.zeta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionChainOutput {
    pub u_hat: DVector<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub h_hat: DMatrix<f64>,
    pub w: DVector<f64>,
    pub p: f64,
    pub utility: f64,
}

/// `(u_hat, sigma_hat)` read off a moving-average state.
pub fn estimates(ma: &EmaState) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let second = ma
        .second
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("moving-average state lacks second moments".into()))?;
    let u = ma.mean.clone();
    let sigma = second - &u * u.transpose();
    Ok((u, sigma))
}

/// Folds `r_new` into the state and returns the new estimates with the state.
pub fn update_estimators(
    ma: &EmaState,
    r_new: &DVector<f64>,
    zeta: f64,
) -> Result<(DVector<f64>, DMatrix<f64>, EmaState)> {
    if r_new.len() != ma.mean.len() {
        return Err(Error::Dimension {
            context: "estimator update",
            expected: ma.mean.len(),
            actual: r_new.len(),
        });
    }
    let mut next = ma.clone();
    next.zeta = zeta;
    next.update(r_new);
    let (u, s) = estimates(&next)?;
    Ok((u, s, next))
}

fn shrunk(sigma_hat: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let d = sigma_hat.nrows();
    symmetrize(sigma_hat) * (1.0 - tau) + DMatrix::identity(d, d) * tau
}

pub fn shrink_precision(sigma_hat: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0,1), got {tau}")));
    }
    spd_inverse(&shrunk(sigma_hat, tau))
}

struct WeightParts {
    w: DVector<f64>,
    b: DVector<f64>,
    s2: f64,
    lambda: f64,
}

fn weights_parts(u: &DVector<f64>, h: &DMatrix<f64>, phi: f64, formula: WeightFormula) -> Result<WeightParts> {
    let a = h * u;
    let b = h.column_sum();
    let s1 = a.sum();
    let s2 = b.sum();
    if !(s2 > 0.0) {
        return Err(Error::Internal(format!("1^T H 1 = {s2} is not positive")));
    }
    let lambda = (s1 - 2.0 * phi) / s2;
    let w = (&a - &b * lambda) * formula.scale(phi);
    Ok(WeightParts { w, b, s2, lambda })
}

/// Maximizer of `w^T u - phi w^T H^{-1} w` subject to `w^T 1 = 1`.
pub fn mean_variance_weights(u_hat: &DVector<f64>, h_hat: &DMatrix<f64>, phi: f64) -> Result<DVector<f64>> {
    mean_variance_weights_with(u_hat, h_hat, phi, WeightFormula::Kkt)
}

pub fn mean_variance_weights_with(
    u_hat: &DVector<f64>,
    h_hat: &DMatrix<f64>,
    phi: f64,
    formula: WeightFormula,
) -> Result<DVector<f64>> {
    if h_hat.nrows() != u_hat.len() || h_hat.ncols() != u_hat.len() {
        return Err(Error::Dimension {
            context: "precision vs mean",
            expected: u_hat.len(),
            actual: h_hat.nrows(),
        });
    }
    if !(phi > 0.0) {
        return Err(Error::InvalidParameter(format!("phi must be > 0, got {phi}")));
    }
    Ok(weights_parts(u_hat, h_hat, phi, formula)?.w)
}

/// Realized portfolio return and utility.
pub fn realize(w: &DVector<f64>, r_realized: &DVector<f64>, phi: f64) -> Result<(f64, f64)> {
    if w.len() != r_realized.len() {
        return Err(Error::Dimension {
            context: "realize",
            expected: w.len(),
            actual: r_realized.len(),
        });
    }
    let p = w.dot(r_realized);
    Ok((p, p - phi * p * p))
}

struct StepRecord {
    u: DVector<f64>,
    h: DMatrix<f64>,
    b: DVector<f64>,
    s2: f64,
    lambda: f64,
    w: DVector<f64>,
    p: f64,
    r_realized: DVector<f64>,
}

/// Intermediate values of one chain evaluation, enough for [`chain_backward`].
pub struct ChainTape {
    params: DecisionParams,
    block: DMatrix<f64>,
    steps: Vec<StepRecord>,
}

impl ChainTape {
    pub fn steps(&self) -> usize {
        self.steps.len()
    }
}

/// Cotangents of one step's outputs. Missing entries count as zero.
#[derive(Debug, Clone, Default)]
pub struct OutputCotangent {
    pub u_hat: Option<DVector<f64>>,
    pub sigma_hat: Option<DMatrix<f64>>,
    pub h_hat: Option<DMatrix<f64>>,
    pub w: Option<DVector<f64>>,
    pub p: f64,
    pub utility: f64,
}

impl OutputCotangent {
    pub fn utility(g: f64) -> Self {
        Self {
            utility: g,
            ..Self::default()
        }
    }
}

/// Runs the chain for `k = 1..K` on a `K x d` block.
pub fn decision_chain(
    block: &DMatrix<f64>,
    conditioning: &ConditioningState,
    params: &DecisionParams,
) -> Result<Vec<DecisionChainOutput>> {
    Ok(decision_chain_taped(block, &conditioning.ma, params)?.0)
}

pub fn decision_chain_taped(
    block: &DMatrix<f64>,
    ma: &EmaState,
    params: &DecisionParams,
) -> Result<(Vec<DecisionChainOutput>, ChainTape)> {
    params.validate()?;
    let d = ma.mean.len();
    if block.ncols() != d {
        return Err(Error::Dimension {
            context: "decision chain block width",
            expected: d,
            actual: block.ncols(),
        });
    }
    if (ma.zeta - params.zeta).abs() > 0.0 {
        return Err(Error::InvalidParameter(format!(
            "moving-average state smoothing {} differs from estimator smoothing {}",
            ma.zeta, params.zeta
        )));
    }
    let k_max = block.nrows();
    let mut state = ma.clone();
    let mut outputs = Vec::with_capacity(k_max);
    let mut steps = Vec::with_capacity(k_max);
    for k in 0..k_max {
        if k > 0 {
            state.update(&block.row(k - 1).transpose());
        }
        let (u, sigma) = estimates(&state)?;
        let h = shrink_precision(&sigma, params.tau)?;
        let parts = weights_parts(&u, &h, params.phi, params.formula)?;
        let r_realized: DVector<f64> = block.row(k).transpose();
        let (p, utility) = realize(&parts.w, &r_realized, params.phi)?;
        outputs.push(DecisionChainOutput {
            u_hat: u.clone(),
            sigma_hat: sigma,
            h_hat: h.clone(),
            w: parts.w.clone(),
            p,
            utility,
        });
        steps.push(StepRecord {
            u,
            h,
            b: parts.b,
            s2: parts.s2,
            lambda: parts.lambda,
            w: parts.w,
            p,
            r_realized,
        });
    }
    Ok((
        outputs,
        ChainTape {
            params: *params,
            block: block.clone(),
            steps,
        },
    ))
}

/// Gradient of `sum_k <cot_k, output_k>` with respect to every block entry.
pub fn chain_backward(tape: &ChainTape, cotangents: &[OutputCotangent]) -> Result<DMatrix<f64>> {
    let k_max = tape.steps.len();
    if cotangents.len() != k_max {
        return Err(Error::Dimension {
            context: "chain cotangents",
            expected: k_max,
            actual: cotangents.len(),
        });
    }
    let d = tape.block.ncols();
    let DecisionParams {
        phi,
        tau,
        zeta,
        formula,
    } = tape.params;
    let c = formula.scale(phi);
    let ones = DVector::from_element(d, 1.0);

    let mut grad = DMatrix::zeros(k_max, d);
    // Cotangents flowing into the moving-average state of the current step.
    let mut carry_mean = DVector::zeros(d);
    let mut carry_second = DMatrix::zeros(d, d);

    for k in (0..k_max).rev() {
        let st = &tape.steps[k];
        let cot = &cotangents[k];

        let p_bar = cot.p + cot.utility * (1.0 - 2.0 * phi * st.p);
        let mut w_bar = cot.w.clone().unwrap_or_else(|| DVector::zeros(d));
        w_bar += &st.r_realized * p_bar;
        let r_bar_k = &st.w * p_bar;
        for j in 0..d {
            grad[(k, j)] += r_bar_k[j];
        }

        // w = c (a - lambda b), lambda = (1^T a - 2 phi) / (1^T b)
        let mut a_bar = &w_bar * c;
        let mut b_bar = &w_bar * (-c * st.lambda);
        let lambda_bar = -c * st.b.dot(&w_bar);
        let s1_bar = lambda_bar / st.s2;
        let s2_bar = -lambda_bar * st.lambda / st.s2;
        a_bar.add_scalar_mut(s1_bar);
        b_bar.add_scalar_mut(s2_bar);

        // a = H u, b = H 1
        let mut h_bar = cot.h_hat.clone().unwrap_or_else(|| DMatrix::zeros(d, d));
        h_bar += &a_bar * st.u.transpose() + &b_bar * ones.transpose();
        let mut u_bar = &st.h * &a_bar;
        if let Some(g) = &cot.u_hat {
            u_bar += g;
        }

        // H = A^{-1}, A = (1 - tau) sym(sigma) + tau I
        let a_mat_bar = -(&st.h * &h_bar * &st.h);
        let mut sigma_bar = symmetrize(&a_mat_bar) * (1.0 - tau);
        if let Some(g) = &cot.sigma_hat {
            sigma_bar += g;
        }

        // sigma = M - u u^T, u = mean
        u_bar -= (&sigma_bar + sigma_bar.transpose()) * &st.u;
        let mean_bar = &carry_mean + u_bar;
        let second_bar = &carry_second + sigma_bar;

        if k > 0 {
            // state_k = zeta state_{k-1} + (1 - zeta) [r, r r^T] with r = block row k-1
            let r_prev: DVector<f64> = tape.block.row(k - 1).transpose();
            let r_bar = &mean_bar * (1.0 - zeta) + (&second_bar + second_bar.transpose()) * &r_prev * (1.0 - zeta);
            for j in 0..d {
                grad[(k - 1, j)] += r_bar[j];
            }
            carry_mean = mean_bar * zeta;
            carry_second = second_bar * zeta;
        }
    }
    Ok(grad)
}
