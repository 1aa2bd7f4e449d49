//! Full pipeline on synthetic data: generate a network and cascades, train
//! with alternating phases, and score the held-out test split.
//!
//! Run with: cargo run --release --example train_end_to_end

use cascade_vae::cascade::{seed_slice, split_dataset};
use cascade_vae::config::TrainConfig;
use cascade_vae::diffusion::rank_inactive;
use cascade_vae::metrics::{mean_average_precision, mean_recall};
use cascade_vae::synth::{generate_ba, simulate_ic, BaParams, IcParams};
use cascade_vae::temporal::PositionalTable;
use cascade_vae::train::train;

fn main() -> cascade_vae::Result<()> {
    let net = generate_ba(&BaParams { n: 200, m: 2, seed: 1 })?;
    let (cascades, _) = simulate_ic(
        &net,
        &IcParams { p: 0.15, target_len: 10, num_cascades: 120, seed: 2 },
    )?;
    let (train_set, _, test_set) = split_dataset(&cascades, (0.8, 0.0, 0.2), 3)?;
    println!("{} train / {} test cascades", train_set.len(), test_set.len());

    // the test split is small, so skip validation-based early stopping
    let cfg = TrainConfig {
        embed_dim: 16,
        hidden_dims: vec![16],
        epochs: 15,
        pretrain_epochs: 30,
        val_fraction: 0.0,
        seed: 4,
        ..TrainConfig::default()
    };
    let outcome = train(&net, &train_set, &cfg)?;
    println!("trained {} epochs", outcome.epochs_run);

    let diff = cfg.diffusion_spec();
    let mut pe = PositionalTable::new(cfg.embed_dim, 16)?;
    let results: Vec<_> = test_set
        .iter()
        .filter_map(|c| seed_slice(c, 0.3))
        .map(|ep| rank_inactive(&outcome.store, &diff, &ep, net.num_users, &mut pe))
        .collect::<cascade_vae::Result<_>>()?;
    for k in [10, 50] {
        println!(
            "test MAP@{k} {:.4}  Recall@{k} {:.4}",
            mean_average_precision(&results, k).mean,
            mean_recall(&results, k).mean
        );
    }
    Ok(())
}
