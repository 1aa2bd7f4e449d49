//! Verify analytic gradients against finite differences for every tensor in
//! the model, across both autoencoder variants.
//!
//! Run with: cargo run --release --example gradient_check

use cascade_vae::config::TrainConfig;
use cascade_vae::gradcheck::gradcheck_default;
use cascade_vae::vae::{DecoderKind, EncoderKind};

fn main() -> cascade_vae::Result<()> {
    let base = TrainConfig {
        embed_dim: 8,
        hidden_dims: vec![8],
        seed: 17,
        ..TrainConfig::default()
    };
    let variants = [
        ("gcn + inner product", base.clone()),
        (
            "mlp + mlp",
            TrainConfig {
                encoder: EncoderKind::Mlp,
                decoder: DecoderKind::Mlp,
                ..base
            },
        ),
    ];
    for (label, cfg) in variants {
        let report = gradcheck_default(&cfg, None)?;
        println!("{label}:");
        for (name, err) in &report.per_tensor {
            println!("  {name:<16} max rel err {err:.3e}");
        }
        println!(
            "  => {} (threshold {:.0e})\n",
            if report.passed() { "PASS" } else { "FAIL" },
            report.threshold
        );
    }
    Ok(())
}
