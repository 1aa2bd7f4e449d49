//! Inspect the attention weights the fusion network assigns to seed
//! activations.
//!
//! Run with: cargo run --example attention

use cascade_vae::diffusion::{coattend, influence_prob, DiffusionSpec};
use cascade_vae::params::ParamStore;
use cascade_vae::rng::RngStream;
use cascade_vae::temporal::PositionalTable;

fn main() -> cascade_vae::Result<()> {
    let spec = DiffusionSpec::defaults(8);
    let mut store = ParamStore::new();
    let mut rng = RngStream::new(3);
    spec.init_params(12, &mut store, &mut rng);

    // a five-seed episode: user 4 first, then 0, 7, 2, 9
    let seeds: Vec<(usize, usize)> = [4usize, 0, 7, 2, 9]
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, i + 1))
        .collect();
    let mut pe = PositionalTable::new(8, 8)?;
    let out = coattend(&store, &spec, &seeds, &mut pe)?;

    println!("attention over seeds (sums to {:.3}):", out.alpha.iter().sum::<f64>());
    for (&(u, step), a) in seeds.iter().zip(&out.alpha) {
        println!("  user {u:>2} at step {step}: weight {a:.4}");
    }

    let v_r = store.get(spec.receiver_name());
    println!("\ninfluence probability for inactive users:");
    for j in [1usize, 5, 11] {
        println!("  user {j:>2}: {:.4}", influence_prob(&out.h, v_r.row(j)));
    }
    Ok(())
}
