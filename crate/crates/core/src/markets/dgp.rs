use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mvt::{MvtSampler, MvtSpec};
use super::{EmaState, ReturnPanel};
use crate::error::{Error, Result};

/// `r_{t+1} = b0 r_t + sum_i b_i MA_{zeta_i}(r_t) + eps`, `eps ~ t(mu, Sigma, nu)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DgpParams {
    pub b: [f64; 5],
    pub zetas: [f64; 4],
    pub noise: MvtSpec,
}

impl Default for DgpParams {
    fn default() -> Self {
        Self {
            b: [0.3, 0.1, 0.2, 0.1, 0.1],
            zetas: [0.55, 0.74, 0.86, 0.92],
            noise: MvtSpec::market_default(4),
        }
    }
}

impl DgpParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(z) = self.zetas.iter().find(|z| !(**z > 0.0 && **z < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "smoothing parameter {z} outside (0,1)"
            )));
        }
        if !(self.noise.dof > 2.0) {
            return Err(Error::InvalidParameter(format!(
                "noise dof must exceed 2 for finite variance, got {}",
                self.noise.dof
            )));
        }
        if self.b.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("dgp coefficients".into()));
        }
        self.noise.validate()
    }

    pub fn dim(&self) -> usize {
        self.noise.dim()
    }
}

/// Runs the recursion from `r0` with all moving averages at zero, drawing the
/// innovation for each step from `noise`. The first `burn_in` generated rows
/// are discarded.
pub fn simulate_with_noise<F>(
    params: &DgpParams,
    len: usize,
    burn_in: usize,
    r0: DVector<f64>,
    mut noise: F,
) -> Result<ReturnPanel>
where
    F: FnMut() -> DVector<f64>,
{
    let d = r0.len();
    let mut emas: Vec<EmaState> = params.zetas.iter().map(|&z| EmaState::zeros(z, d, false)).collect();
    let mut r = r0;
    let mut out = DMatrix::zeros(len, d);
    for step in 0..burn_in + len {
        for ema in &mut emas {
            ema.update(&r);
        }
        let mut next = &r * params.b[0];
        for (bi, ema) in params.b[1..].iter().zip(&emas) {
            next += &ema.mean * *bi;
        }
        next += noise();
        if step >= burn_in {
            out.set_row(step - burn_in, &next.transpose());
        }
        r = next;
    }
    ReturnPanel::new(out, None)
}

/// Simulated panel of `len` rows after `burn_in` discarded steps, `r_0 = 0`.
pub fn simulate_panel(params: &DgpParams, len: usize, burn_in: usize, seed: u64) -> Result<ReturnPanel> {
    params.validate()?;
    if len == 0 {
        return Err(Error::InvalidParameter("panel length must be >= 1".into()));
    }
    let sampler = MvtSampler::new(&params.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = params.dim();
    simulate_with_noise(params, len, burn_in, DVector::zeros(d), || sampler.draw(&mut rng))
}
