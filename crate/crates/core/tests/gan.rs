use std::fs;

use datgan_core::gan::{
    make_variant, surrogate_losses, BlockQuantities, DecisionQuantity, DiscriminatorBank, TrainCheckpoint, TrainConfig,
    Trainer, Variant,
};
use datgan_core::markets::{simulate_panel, DgpParams, PreparedPanel, ReturnPanel, DEFAULT_WINDOWS};
use datgan_core::{ConditioningState, DecisionParams, OptimizerKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn panel(seed: u64) -> ReturnPanel {
    simulate_panel(&DgpParams::default(), 200, 100, seed).unwrap()
}

fn cfg(variant: Variant) -> TrainConfig {
    TrainConfig {
        k: 4,
        batch: 16,
        batches: 4,
        variant,
        seed: 42,
        log_interval: 1,
        checkpoint_interval: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn term_weights_follow_decay() {
    for v in Variant::ALL {
        let m = make_variant(v, 4, 4, &[DecisionQuantity::Utility, DecisionQuantity::Weights], 0.8).unwrap();
        for t in &m.terms {
            assert_eq!(t.weight, 0.8f64.powi(t.k as i32));
        }
        let ks: Vec<usize> = m.terms.iter().map(|t| t.k).collect();
        assert_eq!(*ks.iter().max().unwrap(), v.effective_steps(4));
    }
}

#[test]
fn coupled_inputs_give_exactly_zero() {
    let params = DecisionParams::default();
    let prep = PreparedPanel::new(panel(1), 4, DEFAULT_WINDOWS, params).unwrap();
    let blocks = prep.sample_blocks(32, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let qs: Vec<BlockQuantities> = blocks.iter().map(BlockQuantities::real).collect();
    let conds: Vec<&ConditioningState> = blocks.iter().map(|b| &b.conditioning).collect();
    for v in Variant::ALL {
        let mask = make_variant(v, 4, 4, &[DecisionQuantity::Utility], 0.8).unwrap();
        let disc = DiscriminatorBank::new(mask, 0.5, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let l = surrogate_losses(&disc, &qs, &qs, &conds).unwrap();
        assert_eq!(l.discriminator_objective, 0.0);
        assert!(l.terms.iter().all(|t| t.gap == 0.0));
    }
}

#[test]
fn clip_holds_after_every_critic_step() {
    for v in Variant::ALL {
        let c = TrainConfig {
            alpha: 0.05,
            optimizer: OptimizerKind::Rmsprop { decay: 0.9, eps: 1e-8 },
            ..cfg(v)
        };
        let mut t = Trainer::new(panel(2), c, DecisionParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..8 {
            let blocks = t.prepared().sample_blocks(16, &mut rng).unwrap();
            t.discriminator_epoch(&blocks).unwrap();
            let (lo, hi) = t.discriminator().param_range();
            assert!(lo >= -0.5 && hi <= 0.5, "{v}: [{lo}, {hi}]");
        }
    }
}

#[test]
fn equal_seeds_write_identical_checkpoints() {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        let mut t = Trainer::new(panel(3), cfg(Variant::RetUtility), DecisionParams::default()).unwrap();
        t.run(|t| t.checkpoint()?.save_dir(&d.path().join(format!("step-{}", t.step()))))
            .unwrap();
    }
    for step in [0, 2, 4] {
        for f in ["manifest.json", "generator.json", "discriminator.json"] {
            let a = fs::read(dirs[0].path().join(format!("step-{step}")).join(f)).unwrap();
            let b = fs::read(dirs[1].path().join(format!("step-{step}")).join(f)).unwrap();
            assert_eq!(a, b, "step {step} {f}");
        }
    }
    let ck = TrainCheckpoint::load_dir(&dirs[0].path().join("step-4")).unwrap();
    assert_eq!(ck.manifest.step, 4);
}

#[test]
fn different_seeds_differ() {
    let a = Trainer::new(panel(3), cfg(Variant::Ret), DecisionParams::default()).unwrap();
    let b = Trainer::new(
        panel(3),
        TrainConfig {
            seed: 43,
            ..cfg(Variant::Ret)
        },
        DecisionParams::default(),
    )
    .unwrap();
    assert_ne!(a.generator(), b.generator());
}

#[test]
fn resume_with_changed_config_is_refused() {
    let mut t = Trainer::new(panel(4), cfg(Variant::Ret), DecisionParams::default()).unwrap();
    t.train_batch().unwrap();
    let ck = t.checkpoint().unwrap();
    let other = TrainConfig {
        alpha: 1e-3,
        ..cfg(Variant::Ret)
    };
    assert!(Trainer::from_checkpoint(panel(4), other, DecisionParams::default(), &ck).is_err());
    let longer = TrainConfig {
        batches: 10,
        ..cfg(Variant::Ret)
    };
    assert!(Trainer::from_checkpoint(panel(4), longer, DecisionParams::default(), &ck).is_ok());
}
