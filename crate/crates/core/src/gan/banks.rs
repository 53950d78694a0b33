use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::LossMask;
use crate::checkpoint::{BankCheckpoint, NamedNet, NetRecord};
use crate::error::{Error, Result};
use crate::markets::{ConditioningState, FEATURES_PER_ASSET};
use crate::nn::{Gradients, Net, Optimizer, Tape};

pub const NOISE_DIM: usize = 8;
pub const GENERATOR_HIDDEN: usize = 4;
pub const DISCRIMINATOR_HIDDEN: usize = 8;

/// Noise for one block; `0[k][a]` drives asset `a` at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise(pub Vec<Vec<[f64; NOISE_DIM]>>);

impl Noise {
    /// Draw order: step, then asset, then coordinate.
    pub fn draw<R: Rng + ?Sized>(steps: usize, assets: usize, rng: &mut R) -> Self {
        Noise(
            (0..steps)
                .map(|_| {
                    (0..assets)
                        .map(|_| std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal)))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn steps(&self) -> usize {
        self.0.len()
    }
}

fn generator_dims() -> [usize; 3] {
    [FEATURES_PER_ASSET + NOISE_DIM, GENERATOR_HIDDEN, 1]
}

fn bank_records(nets: &[Net], names: impl Iterator<Item = String>, opt: Option<&[Optimizer]>) -> Vec<NamedNet> {
    nets.iter()
        .zip(names)
        .enumerate()
        .map(|(i, (net, name))| {
            let mut rec = NetRecord::from_net(net);
            if let Some(o) = opt.and_then(|o| o.get(i)) {
                if !o.state().is_empty() {
                    rec = rec.with_optimizer_state(net, o.state());
                }
            }
            NamedNet { name, net: rec }
        })
        .collect()
}

/// One small network per asset, shared across look-ahead steps.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorBank {
    nets: Vec<Net>,
}

impl GeneratorBank {
    pub fn new<R: Rng + ?Sized>(assets: usize, init_scale: f64, rng: &mut R) -> Result<Self> {
        let nets = (0..assets)
            .map(|_| Net::init_uniform(&generator_dims(), init_scale, rng))
            .collect::<Result<_>>()?;
        Self::from_nets(nets)
    }

    pub fn zeros(assets: usize) -> Result<Self> {
        Self::from_nets(
            (0..assets)
                .map(|_| Net::zeros(&generator_dims()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn from_nets(nets: Vec<Net>) -> Result<Self> {
        if nets.is_empty() {
            return Err(Error::InvalidParameter(
                "generator bank needs at least one asset".into(),
            ));
        }
        for n in &nets {
            if n.dims() != generator_dims() {
                return Err(Error::InvalidParameter(format!(
                    "generator dims {:?}, expected {:?}",
                    n.dims(),
                    generator_dims()
                )));
            }
        }
        Ok(Self { nets })
    }

    pub fn assets(&self) -> usize {
        self.nets.len()
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut [Net] {
        &mut self.nets
    }

    pub fn param_norm(&self) -> f64 {
        self.nets.iter().map(|n| n.param_norm().powi(2)).sum::<f64>().sqrt()
    }

    fn check(&self, cond: &ConditioningState, noise: &Noise) -> Result<()> {
        if cond.assets() != self.assets() {
            return Err(Error::Dimension {
                context: "generator conditioning assets",
                expected: self.assets(),
                actual: cond.assets(),
            });
        }
        if let Some(bad) = noise.0.iter().find(|row| row.len() != self.assets()) {
            return Err(Error::Dimension {
                context: "generator noise assets",
                expected: self.assets(),
                actual: bad.len(),
            });
        }
        Ok(())
    }

    fn input(cond: &ConditioningState, asset: usize, z: &[f64; NOISE_DIM]) -> [f64; FEATURES_PER_ASSET + NOISE_DIM] {
        let mut x = [0.0; FEATURES_PER_ASSET + NOISE_DIM];
        x[..FEATURES_PER_ASSET].copy_from_slice(&cond.asset_features(asset));
        x[FEATURES_PER_ASSET..].copy_from_slice(z);
        x
    }

    /// `K x d` block; every step sees the same conditioning `x_t`.
    pub fn generate_with_noise(&self, cond: &ConditioningState, noise: &Noise) -> Result<DMatrix<f64>> {
        self.check(cond, noise)?;
        let mut out = DMatrix::zeros(noise.steps(), self.assets());
        for (k, row) in noise.0.iter().enumerate() {
            for (a, z) in row.iter().enumerate() {
                out[(k, a)] = self.nets[a].predict(&Self::input(cond, a, z))?[0];
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generated block".into()));
        }
        Ok(out)
    }

    pub fn generate_block<R: Rng + ?Sized>(
        &self,
        cond: &ConditioningState,
        steps: usize,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        let noise = Noise::draw(steps, self.assets(), rng);
        self.generate_with_noise(cond, &noise)
    }

    /// Block plus one tape per `(k, asset)`, indexed `k * d + a`.
    pub(crate) fn generate_taped(&self, cond: &ConditioningState, noise: &Noise) -> Result<(DMatrix<f64>, Vec<Tape>)> {
        self.check(cond, noise)?;
        let d = self.assets();
        let mut out = DMatrix::zeros(noise.steps(), d);
        let mut tapes = Vec::with_capacity(noise.steps() * d);
        for (k, row) in noise.0.iter().enumerate() {
            for (a, z) in row.iter().enumerate() {
                let (y, tape) = self.nets[a].forward(&Self::input(cond, a, z))?;
                out[(k, a)] = y[0];
                tapes.push(tape);
            }
        }
        Ok((out, tapes))
    }

    /// Adds `scale * d<grad, block>/d params` into `acc` (one entry per asset).
    pub(crate) fn accumulate(
        &self,
        tapes: &[Tape],
        block_grad: &DMatrix<f64>,
        scale: f64,
        acc: &mut [Gradients],
    ) -> Result<()> {
        let d = self.assets();
        for k in 0..block_grad.nrows() {
            for a in 0..d {
                let g = block_grad[(k, a)];
                if g == 0.0 {
                    continue;
                }
                let grads = self.nets[a].backward(&tapes[k * d + a], &[g])?;
                acc[a].add_scaled(&grads, scale);
            }
        }
        Ok(())
    }

    pub fn net_names(&self) -> impl Iterator<Item = String> {
        (0..self.assets()).map(|a| format!("asset_{a}"))
    }

    pub fn to_checkpoint(&self, seed: u64, step: u64, optimizers: Option<&[Optimizer]>) -> BankCheckpoint {
        BankCheckpoint::new(
            "generator",
            seed,
            step,
            bank_records(&self.nets, self.net_names(), optimizers),
        )
    }

    pub fn from_checkpoint(ck: &BankCheckpoint) -> Result<Self> {
        if ck.role != "generator" {
            return Err(Error::Checkpoint(format!(
                "expected a generator bank, found `{}`",
                ck.role
            )));
        }
        Self::from_nets(ck.nets.iter().map(|n| n.net.to_net()).collect::<Result<_>>()?)
    }
}

/// One critic per loss term of a [`LossMask`], in mask order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorBank {
    mask: LossMask,
    nets: Vec<Net>,
}

impl DiscriminatorBank {
    pub fn new<R: Rng + ?Sized>(mask: LossMask, init_scale: f64, rng: &mut R) -> Result<Self> {
        let nets = mask
            .terms
            .iter()
            .map(|t| Net::init_uniform(&[t.input_dim, DISCRIMINATOR_HIDDEN, 1], init_scale, rng))
            .collect::<Result<_>>()?;
        Self::from_nets(mask, nets)
    }

    pub fn from_nets(mask: LossMask, nets: Vec<Net>) -> Result<Self> {
        if nets.len() != mask.terms.len() {
            return Err(Error::Dimension {
                context: "critics per loss term",
                expected: mask.terms.len(),
                actual: nets.len(),
            });
        }
        for (t, n) in mask.terms.iter().zip(&nets) {
            if n.input_dim() != t.input_dim || n.output_dim() != 1 {
                return Err(Error::Dimension {
                    context: "critic input width",
                    expected: t.input_dim,
                    actual: n.input_dim(),
                });
            }
        }
        Ok(Self { mask, nets })
    }

    /// Zero weights and output bias `b`: every critic is the constant `b`.
    pub fn constant(mask: LossMask, b: f64) -> Result<Self> {
        let nets = mask
            .terms
            .iter()
            .map(|t| {
                let mut net = Net::zeros(&[t.input_dim, DISCRIMINATOR_HIDDEN, 1])?;
                if let Some(last) = net.layers_mut().last_mut() {
                    last.bias[0] = b;
                }
                Ok(net)
            })
            .collect::<Result<_>>()?;
        Self::from_nets(mask, nets)
    }

    pub fn mask(&self) -> &LossMask {
        &self.mask
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut [Net] {
        &mut self.nets
    }

    pub fn clip(&mut self, lb: f64, ub: f64) -> Result<()> {
        for n in &mut self.nets {
            n.clip_params(lb, ub)?;
        }
        Ok(())
    }

    /// Smallest and largest parameter over all critics.
    pub fn param_range(&self) -> (f64, f64) {
        self.nets
            .iter()
            .flat_map(|n| n.params())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn param_norm(&self) -> f64 {
        self.nets.iter().map(|n| n.param_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn to_checkpoint(&self, seed: u64, step: u64, optimizers: Option<&[Optimizer]>) -> BankCheckpoint {
        let names = self.mask.terms.iter().map(|t| t.name());
        BankCheckpoint::new("discriminator", seed, step, bank_records(&self.nets, names, optimizers))
    }

    pub fn from_checkpoint(mask: LossMask, ck: &BankCheckpoint) -> Result<Self> {
        if ck.role != "discriminator" {
            return Err(Error::Checkpoint(format!(
                "expected a discriminator bank, found `{}`",
                ck.role
            )));
        }
        let nets = mask
            .terms
            .iter()
            .map(|t| {
                ck.get(&t.name())
                    .ok_or_else(|| Error::Checkpoint(format!("critic `{}` missing from checkpoint", t.name())))?
                    .to_net()
            })
            .collect::<Result<_>>()?;
        Self::from_nets(mask, nets)
    }
}
