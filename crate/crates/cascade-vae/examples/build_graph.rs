//! Build a social network from an edge list and inspect its normalized
//! neighborhood view.
//!
//! Run with: cargo run --example build_graph

use cascade_vae::graph::{build_network, normalized_laplacian, Vocab};

fn main() -> cascade_vae::Result<()> {
    let raw_edges = [
        ("alice", "bob"),
        ("bob", "carol"),
        ("carol", "alice"),
        ("carol", "dave"),
        ("dave", "erin"),
        ("bob", "bob"),     // self loop, dropped
        ("alice", "bob"),   // duplicate, dropped
    ];

    let mut vocab = Vocab::new();
    for (a, b) in &raw_edges {
        vocab.intern(a);
        vocab.intern(b);
    }
    let pairs: Vec<(String, String)> = raw_edges
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let net = build_network(&pairs, &vocab)?;

    println!("{} users, {} undirected edges", net.num_users, net.edges.len());
    for u in 0..net.num_users {
        let nbrs: Vec<&str> = net.neighbors(u).map(|v| vocab.id_of(v)).collect();
        println!("  {:<6} degree {}  neighbors {:?}", vocab.id_of(u), net.degrees[u], nbrs);
    }

    let view = normalized_laplacian(&net);
    println!("\nsymmetrically normalized neighborhood rows:");
    for u in 0..net.num_users {
        let row = view.neighborhood_row(u)?;
        let pretty: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("  {:<6} {:?}", vocab.id_of(u), pretty);
    }
    Ok(())
}
