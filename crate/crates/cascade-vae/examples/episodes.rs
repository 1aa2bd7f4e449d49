//! Slice cascades into training episodes and evaluation seed sets.
//!
//! Run with: cargo run --example episodes

use cascade_vae::cascade::{make_episodes, seed_slice, Cascade};

fn main() {
    let cascade = Cascade {
        id: "story42".into(),
        activations: vec![(3, 1), (0, 2), (7, 3), (1, 4), (5, 5)],
    };

    // every prefix of length 2..K-1 becomes one training episode
    println!("training episodes from a length-{} cascade:", cascade.len());
    for ep in make_episodes(&cascade) {
        let seeds: Vec<usize> = ep.seeds.iter().map(|&(u, _)| u).collect();
        println!("  seeds {:?} -> targets {:?}", seeds, ep.targets);
    }

    // at evaluation time a single prefix fraction is revealed
    for pct in [0.2, 0.4, 0.6] {
        let ep = seed_slice(&cascade, pct).expect("cascade long enough");
        println!(
            "seed fraction {pct}: {} seeds observed, {} users to recover",
            ep.seeds.len(),
            ep.targets.len()
        );
    }
}
