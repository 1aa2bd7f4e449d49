//! Generate a preferential-attachment network and simulate cascades over it.
//!
//! Run with: cargo run --example synthesize

use cascade_vae::synth::{generate_ba, simulate_ic, BaParams, IcParams};

fn main() -> cascade_vae::Result<()> {
    let net = generate_ba(&BaParams { n: 500, m: 2, seed: 7 })?;
    let mut degrees = net.degrees.clone();
    degrees.sort_unstable();
    println!(
        "network: {} users, {} edges, median degree {}, max degree {}",
        net.num_users,
        net.edges.len(),
        degrees[degrees.len() / 2],
        degrees.last().unwrap()
    );

    let params = IcParams { p: 0.1, target_len: 20, num_cascades: 50, seed: 8 };
    let (cascades, report) = simulate_ic(&net, &params)?;
    let lengths: Vec<usize> = cascades.iter().map(|c| c.len()).collect();
    let mean_len = lengths.iter().sum::<usize>() as f64 / lengths.len().max(1) as f64;
    println!(
        "cascades: {} kept (mean length {:.1}), {} dropped short, {} truncated, {} attempts",
        cascades.len(),
        mean_len,
        report.dropped_short,
        report.truncated,
        report.attempts
    );
    if let Some(c) = cascades.first() {
        println!("first cascade: {:?}", c.users());
    }
    Ok(())
}
