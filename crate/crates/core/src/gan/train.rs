use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::banks::{DiscriminatorBank, GeneratorBank, Noise};
use super::losses::{
    discriminator_gradients, generator_objective_and_gradients, BlockQuantities, SurrogateLosses, TermLoss,
};
use super::{make_variant, DecisionQuantity, LossMask, Variant};
use crate::checkpoint::BankCheckpoint;
use crate::decision::{DecisionChainOutput, DecisionParams};
use crate::error::{Error, Result};
use crate::markets::{BlockSample, ConditioningState, PreparedPanel, ReturnPanel, DEFAULT_WINDOWS};
use crate::nn::{Direction, Optimizer, OptimizerKind};

pub const RUN_FORMAT: &str = "datgan-run/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Learning rate of the critics, and of the generator unless
    /// `generator_alpha` is set.
    pub alpha: f64,
    pub generator_alpha: Option<f64>,
    /// Term weight base: a step-`k` term is weighted `decay^k`.
    pub decay: f64,
    /// Critic epochs per batch.
    pub s_d: usize,
    /// Generator epochs per batch.
    pub s_g: usize,
    pub clip_lb: f64,
    pub clip_ub: f64,
    /// Look-ahead steps.
    pub k: usize,
    /// Blocks per epoch.
    pub batch: usize,
    /// Number of batches.
    pub batches: u64,
    pub variant: Variant,
    pub seed: u64,
    /// Decision quantities with their own critics.
    pub quantities: Vec<DecisionQuantity>,
    pub windows: [usize; 4],
    pub optimizer: OptimizerKind,
    /// Initial parameters are uniform on `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub log_interval: u64,
    pub checkpoint_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-5,
            generator_alpha: None,
            decay: 0.8,
            s_d: 1,
            s_g: 5,
            clip_lb: -0.5,
            clip_ub: 0.5,
            k: 4,
            batch: 32,
            batches: 1_000_000,
            variant: Variant::RetUtility,
            seed: 0,
            quantities: vec![DecisionQuantity::Utility],
            windows: DEFAULT_WINDOWS,
            optimizer: OptimizerKind::Sgd,
            init_scale: 0.1,
            log_interval: 100,
            checkpoint_interval: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter("K and the batch size must be >= 1".into()));
        }
        if !(self.clip_lb < self.clip_ub) {
            return Err(Error::InvalidParameter(format!(
                "clip bounds must satisfy lb < ub, got [{}, {}]",
                self.clip_lb, self.clip_ub
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "decay must lie in (0,1], got {}",
                self.decay
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if let Some(a) = self.generator_alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("generator_alpha must be > 0, got {a}")));
            }
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "init_scale must be >= 0, got {}",
                self.init_scale
            )));
        }
        if self.log_interval == 0 || self.checkpoint_interval == 0 {
            return Err(Error::InvalidParameter(
                "log and checkpoint intervals must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.variant.effective_steps(self.k)
    }

    pub fn mask(&self, assets: usize) -> Result<LossMask> {
        make_variant(self.variant, self.k, assets, &self.quantities, self.decay)
    }

    /// FNV-1a over the configuration with the batch count left out, so a run
    /// extended to more batches keeps its fingerprint.
    pub fn fingerprint(&self, params: &DecisionParams) -> Result<String> {
        let mut c = self.clone();
        c.batches = 0;
        let text = serde_json::to_string(&(c, params))?;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Ok(format!("{h:016x}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: u64,
    pub terms: Vec<TermLoss>,
    pub discriminator_objective: f64,
    pub generator_objective: f64,
    pub wall_seconds: f64,
    pub generator_param_norm: f64,
    pub discriminator_param_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub entries: Vec<TrainLogEntry>,
}

impl TrainLog {
    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub variant: Variant,
    pub config_hash: String,
    pub step: u64,
    pub seed: u64,
    /// Position of the training random stream, decimal.
    pub rng_word_pos: String,
    pub assets: usize,
    pub generator_file: String,
    pub discriminator_file: String,
}

/// Everything needed to continue a run bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainCheckpoint {
    pub manifest: RunManifest,
    pub generator: BankCheckpoint,
    pub discriminator: BankCheckpoint,
}

impl TrainCheckpoint {
    /// Writes `manifest.json`, `generator.json` and `discriminator.json`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut m = serde_json::to_string_pretty(&self.manifest)?;
        m.push('\n');
        fs::write(dir.join("manifest.json"), m)?;
        self.generator.save(&dir.join(&self.manifest.generator_file))?;
        self.discriminator.save(&dir.join(&self.manifest.discriminator_file))?;
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.format != RUN_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported run format `{}`",
                manifest.format
            )));
        }
        let generator = BankCheckpoint::load(&dir.join(&manifest.generator_file))?;
        let discriminator = BankCheckpoint::load(&dir.join(&manifest.discriminator_file))?;
        Ok(Self {
            manifest,
            generator,
            discriminator,
        })
    }

    pub fn generator_bank(&self) -> Result<GeneratorBank> {
        GeneratorBank::from_checkpoint(&self.generator)
    }
}

/// Alternating critic and generator updates over sampled blocks.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    params: DecisionParams,
    prepared: PreparedPanel,
    gen: GeneratorBank,
    disc: DiscriminatorBank,
    gen_opt: Vec<Optimizer>,
    disc_opt: Vec<Optimizer>,
    rng: ChaCha8Rng,
    step: u64,
    log: TrainLog,
    started: Instant,
    last_losses: Option<SurrogateLosses>,
    last_generator_objective: f64,
}

impl Trainer {
    pub fn new(panel: ReturnPanel, cfg: TrainConfig, params: DecisionParams) -> Result<Self> {
        cfg.validate()?;
        let prepared = PreparedPanel::new(panel, cfg.steps(), cfg.windows, params)?;
        let d = prepared.panel().assets();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let gen = GeneratorBank::new(d, cfg.init_scale, &mut rng)?;
        let disc = DiscriminatorBank::new(cfg.mask(d)?, cfg.init_scale, &mut rng)?;
        let gen_opt = gen.nets().iter().map(|n| Optimizer::new(cfg.optimizer, n)).collect();
        let disc_opt = disc.nets().iter().map(|n| Optimizer::new(cfg.optimizer, n)).collect();
        Ok(Self {
            cfg,
            params,
            prepared,
            gen,
            disc,
            gen_opt,
            disc_opt,
            rng,
            step: 0,
            log: TrainLog::default(),
            started: Instant::now(),
            last_losses: None,
            last_generator_objective: f64::NAN,
        })
    }

    pub fn from_checkpoint(
        panel: ReturnPanel,
        cfg: TrainConfig,
        params: DecisionParams,
        ck: &TrainCheckpoint,
    ) -> Result<Self> {
        let mut t = Self::new(panel, cfg, params)?;
        let m = &ck.manifest;
        if m.config_hash != t.cfg.fingerprint(&t.params)? {
            return Err(Error::Checkpoint(
                "checkpoint was written under a different configuration".into(),
            ));
        }
        if m.seed != t.cfg.seed || m.variant != t.cfg.variant {
            return Err(Error::Checkpoint(
                "checkpoint seed or variant differs from the configuration".into(),
            ));
        }
        t.gen = GeneratorBank::from_checkpoint(&ck.generator)?;
        t.disc = DiscriminatorBank::from_checkpoint(t.disc.mask().clone(), &ck.discriminator)?;
        restore_optimizers(&mut t.gen_opt, &ck.generator)?;
        restore_optimizers(&mut t.disc_opt, &ck.discriminator)?;
        let pos: u128 = m
            .rng_word_pos
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad rng position `{}`", m.rng_word_pos)))?;
        t.rng.set_word_pos(pos);
        t.step = m.step;
        Ok(t)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &DecisionParams {
        &self.params
    }

    pub fn prepared(&self) -> &PreparedPanel {
        &self.prepared
    }

    pub fn generator(&self) -> &GeneratorBank {
        &self.gen
    }

    pub fn discriminator(&self) -> &DiscriminatorBank {
        &self.disc
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn into_parts(self) -> (GeneratorBank, DiscriminatorBank, TrainLog) {
        (self.gen, self.disc, self.log)
    }

    fn synthesize(&mut self, conds: &[&ConditioningState]) -> Result<Vec<BlockQuantities>> {
        let steps = self.prepared.steps();
        let need_chain = self.disc.mask().has_decision_terms();
        conds
            .iter()
            .map(|c| {
                let block = self.gen.generate_block(c, steps, &mut self.rng)?;
                if need_chain {
                    BlockQuantities::from_block(block, c, &self.params)
                } else {
                    Ok(BlockQuantities {
                        returns: block,
                        chain: Vec::new(),
                    })
                }
            })
            .collect()
    }

    /// One critic update on `blocks`: fresh synthetic blocks, gradient ascent
    /// on every critic, then clipping.
    pub fn discriminator_epoch(&mut self, blocks: &[BlockSample]) -> Result<SurrogateLosses> {
        let conds: Vec<&ConditioningState> = blocks.iter().map(|b| &b.conditioning).collect();
        let reals: Vec<BlockQuantities> = blocks.iter().map(BlockQuantities::real).collect();
        let synth = self.synthesize(&conds)?;
        let (losses, grads) = discriminator_gradients(&self.disc, &reals, &synth, &conds)?;
        if !losses.discriminator_objective.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(self.dump("critic loss", blocks, Some(&losses)));
        }
        for ((net, opt), g) in self.disc.nets_mut().iter_mut().zip(&mut self.disc_opt).zip(&grads) {
            opt.step(net, g, self.cfg.alpha, Direction::Ascent)?;
        }
        self.disc.clip(self.cfg.clip_lb, self.cfg.clip_ub)?;
        Ok(losses)
    }

    /// One generator update on the anchors of `blocks` with fresh noise. Only
    /// the conditioning of each block is read.
    pub fn generator_epoch(&mut self, blocks: &[BlockSample]) -> Result<f64> {
        let conds: Vec<&ConditioningState> = blocks.iter().map(|b| &b.conditioning).collect();
        let steps = self.prepared.steps();
        let d = self.gen.assets();
        let noise: Vec<Noise> = (0..blocks.len())
            .map(|_| Noise::draw(steps, d, &mut self.rng))
            .collect();
        let (objective, grads, _) =
            generator_objective_and_gradients(&self.gen, &self.disc, &self.params, &conds, &noise)?;
        if !objective.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(self.dump("generator loss", blocks, None));
        }
        for ((net, opt), g) in self.gen.nets_mut().iter_mut().zip(&mut self.gen_opt).zip(&grads) {
            opt.step(
                net,
                g,
                self.cfg.generator_alpha.unwrap_or(self.cfg.alpha),
                Direction::Descent,
            )?;
        }
        Ok(objective)
    }

    fn dump(&self, what: &str, blocks: &[BlockSample], losses: Option<&SurrogateLosses>) -> Error {
        let anchors: Vec<usize> = blocks.iter().map(|b| b.t).collect();
        Error::NonFinite(format!(
            "{what} at batch {}: anchors {anchors:?}; losses {}; generator norm {}, critic norm {}",
            self.step + 1,
            losses.map_or_else(|| "n/a".to_string(), |l| serde_json::to_string(l).unwrap_or_default()),
            self.gen.param_norm(),
            self.disc.param_norm()
        ))
    }

    /// One batch: `s_d` critic epochs, each on freshly sampled blocks, then
    /// `s_g` generator epochs on the last sampled anchors.
    pub fn train_batch(&mut self) -> Result<()> {
        let mut blocks = Vec::new();
        for _ in 0..self.cfg.s_d {
            blocks = self.prepared.sample_blocks(self.cfg.batch, &mut self.rng)?;
            self.last_losses = Some(self.discriminator_epoch(&blocks)?);
        }
        if blocks.is_empty() {
            blocks = self.prepared.sample_blocks(self.cfg.batch, &mut self.rng)?;
        }
        for _ in 0..self.cfg.s_g {
            self.last_generator_objective = self.generator_epoch(&blocks)?;
        }
        self.step += 1;
        if self.step.is_multiple_of(self.cfg.log_interval) {
            self.push_log();
        }
        Ok(())
    }

    fn push_log(&mut self) {
        let losses = self.last_losses.clone();
        self.log.entries.push(TrainLogEntry {
            step: self.step,
            terms: losses.as_ref().map(|l| l.terms.clone()).unwrap_or_default(),
            discriminator_objective: losses.as_ref().map_or(f64::NAN, |l| l.discriminator_objective),
            generator_objective: self.last_generator_objective,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            generator_param_norm: self.gen.param_norm(),
            discriminator_param_norm: self.disc.param_norm(),
        });
    }

    /// Trains up to `cfg.batches`, calling `on_checkpoint` at step 0 (fresh
    /// runs only), every `checkpoint_interval` batches and at the end.
    pub fn run<F: FnMut(&Trainer) -> Result<()>>(&mut self, mut on_checkpoint: F) -> Result<()> {
        if self.step == 0 {
            on_checkpoint(self)?;
        }
        while self.step < self.cfg.batches {
            self.train_batch()?;
            if self.step.is_multiple_of(self.cfg.checkpoint_interval) || self.step == self.cfg.batches {
                on_checkpoint(self)?;
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Result<TrainCheckpoint> {
        let seed = self.cfg.seed;
        Ok(TrainCheckpoint {
            manifest: RunManifest {
                format: RUN_FORMAT.to_string(),
                variant: self.cfg.variant,
                config_hash: self.cfg.fingerprint(&self.params)?,
                step: self.step,
                seed,
                rng_word_pos: self.rng.get_word_pos().to_string(),
                assets: self.gen.assets(),
                generator_file: "generator.json".into(),
                discriminator_file: "discriminator.json".into(),
            },
            generator: self.gen.to_checkpoint(seed, self.step, Some(&self.gen_opt)),
            discriminator: self.disc.to_checkpoint(seed, self.step, Some(&self.disc_opt)),
        })
    }
}

fn restore_optimizers(opts: &mut [Optimizer], ck: &BankCheckpoint) -> Result<()> {
    for (opt, named) in opts.iter_mut().zip(&ck.nets) {
        if let Some(state) = named.net.optimizer_state()? {
            opt.restore_state(state)?;
        } else if !opt.state().is_empty() {
            return Err(Error::Checkpoint(format!(
                "optimizer state missing for `{}`",
                named.name
            )));
        }
    }
    Ok(())
}

/// Runs the whole schedule in memory.
pub fn train(
    panel: ReturnPanel,
    cfg: TrainConfig,
    params: DecisionParams,
) -> Result<(GeneratorBank, DiscriminatorBank, TrainLog)> {
    let mut t = Trainer::new(panel, cfg, params)?;
    t.run(|_| Ok(()))?;
    Ok(t.into_parts())
}

/// Replaces every real-data value of a block with NaN.
pub fn taint(block: &BlockSample) -> BlockSample {
    let mut b = block.clone();
    b.real_block.fill(f64::NAN);
    for out in &mut b.decision_quantities {
        let nan = |_: &f64| f64::NAN;
        *out = DecisionChainOutput {
            u_hat: out.u_hat.map(|v| nan(&v)),
            sigma_hat: out.sigma_hat.map(|v| nan(&v)),
            h_hat: out.h_hat.map(|v| nan(&v)),
            w: out.w.map(|v| nan(&v)),
            p: f64::NAN,
            utility: f64::NAN,
        };
    }
    b
}
