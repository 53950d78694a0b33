use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use datgan_cli::commands::{
    cmd_ablate, cmd_bound, cmd_evaluate, cmd_simulate, cmd_train, EvalTarget, Resume, VariantRow,
};
use datgan_cli::{DataConfig, RunConfig};
use datgan_core::Variant;

#[derive(Parser, Debug)]
#[command(name = "datgan", version, about = "Decision-aware conditional GAN for return series")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration, or a `.json` provenance sidecar to rerun.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set train.k=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory; relative paths are resolved against $DATGAN_OUTPUT_ROOT.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Data seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write simulated training and held-out panels.
    Simulate {
        #[arg(long)]
        len: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Train one variant, writing checkpoints and a log.
    Train {
        #[command(flatten)]
        train: TrainFlags,
        /// Continue a run: from the given checkpoint directory, or from the
        /// latest checkpoint when no directory is given.
        #[arg(long, num_args = 0..=1, value_name = "CHECKPOINT")]
        resume: Option<Option<PathBuf>>,
    },
    /// Wasserstein distances of checkpoints against held-out data.
    Evaluate {
        /// Checkpoint or run directories.
        #[arg(required_unless_present = "replay")]
        checkpoints: Vec<PathBuf>,
        /// Evaluate the real blocks against themselves.
        #[arg(long, conflicts_with = "checkpoints")]
        replay: bool,
        /// Report file to append to.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate all five variants on one data draw.
    Ablate {
        #[command(flatten)]
        train: TrainFlags,
        /// Variants trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Tail bound of the neural-net distance and the samples it needs.
    Bound {
        /// Sample count I.
        #[arg(long)]
        samples: Option<f64>,
        /// Iteration count M.
        #[arg(long)]
        iterations: Option<f64>,
        /// Discriminator parameter count p.
        #[arg(long)]
        params: Option<f64>,
        /// Block length K.
        #[arg(long)]
        block: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta_beta: Option<f64>,
        /// Target failure probability for the sample-count inversion.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Derive b_f from the decision-chain utility cap.
        #[arg(long)]
        utility_support: bool,
    },
}

#[derive(Args, Debug)]
struct TrainFlags {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    batches: Option<u64>,
    /// Model seed.
    #[arg(long)]
    model_seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    checkpoint_interval: Option<u64>,
}

impl TrainFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.variant {
            cfg.train.variant = v;
        }
        if let Some(n) = self.batches {
            cfg.train.batches = n;
        }
        if let Some(s) = self.model_seed {
            cfg.train.seed = s;
        }
        if let Some(a) = self.alpha {
            cfg.train.alpha = a;
        }
        if let Some(c) = self.checkpoint_interval {
            cfg.train.checkpoint_interval = c;
        }
    }
}

fn print_rows(rows: &[VariantRow]) {
    println!(
        "{:<12} {:>8} {:<10} {:>2} {:<10} {:>12}",
        "variant", "step", "quantity", "k", "solver", "distance"
    );
    for r in rows {
        println!(
            "{:<12} {:>8} {:<10} {:>2} {:<10} {:>12.6}",
            r.variant,
            r.checkpoint_step,
            r.quantity,
            r.k,
            r.solver.to_string(),
            r.distance
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.common.config.as_deref(), &cli.common.set)?;
    if let Some(d) = cli.common.output_dir {
        cfg.output_dir = d;
    }
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Simulate { len, burn_in } => {
            if let DataConfig::Simulated(sim) = &mut cfg.data {
                if let Some(n) = len {
                    sim.len = n;
                }
                if let Some(b) = burn_in {
                    sim.burn_in = b;
                }
            } else if len.is_some() || burn_in.is_some() {
                bail!("--len and --burn-in need a simulated data source");
            }
            cfg.validate()?;
            let s = cmd_simulate(&cfg)?;
            println!("{} ({} x {})", s.train_csv.display(), s.rows.0, s.assets);
            println!("{} ({} x {})", s.eval_csv.display(), s.rows.1, s.assets);
        }
        Command::Train { train, resume } => {
            train.apply(&mut cfg);
            cfg.validate()?;
            let resume = match resume {
                None => Resume::Fresh,
                Some(None) => Resume::Latest,
                Some(Some(dir)) => Resume::From(dir),
            };
            let s = cmd_train(&cfg, &resume)?;
            let steps: Vec<String> = s.checkpoints.iter().map(u64::to_string).collect();
            println!(
                "{}: step {}, checkpoints [{}]",
                s.run_dir.display(),
                s.final_step,
                steps.join(", ")
            );
        }
        Command::Evaluate {
            checkpoints,
            replay,
            out,
        } => {
            cfg.validate()?;
            let target = if replay {
                EvalTarget::Replay
            } else {
                EvalTarget::Checkpoints(checkpoints)
            };
            let (path, rows) = cmd_evaluate(&cfg, &target, out.as_deref())?;
            print_rows(&rows);
            println!("appended {} rows to {}", rows.len(), path.display());
        }
        Command::Ablate { train, jobs } => {
            train.apply(&mut cfg);
            cfg.validate()?;
            let s = cmd_ablate(&cfg, jobs)?;
            print_rows(&s.rows);
            println!("wrote {}", s.report.display());
        }
        Command::Bound {
            samples,
            iterations,
            params,
            block,
            eps,
            delta_beta,
            delta,
            utility_support,
        } => {
            let b = &mut cfg.bound;
            for (slot, v) in [
                (&mut b.i, samples),
                (&mut b.m, iterations),
                (&mut b.p, params),
                (&mut b.k, block),
                (&mut b.eps, eps),
                (&mut b.delta_beta, delta_beta),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            cfg.validate()?;
            let (report, path) = cmd_bound(&cfg, delta, utility_support)?;
            print!("{}", report.table());
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
