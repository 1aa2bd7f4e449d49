//! Ranking metrics and quartile breakdowns on hand-built predictions.
//!
//! Run with: cargo run --example evaluate_ranking

use std::collections::BTreeMap;

use cascade_vae::diffusion::RankResult;
use cascade_vae::metrics::{
    average_precision_at_k, mean_average_precision, quartile_report, recall_at_k,
    target_recall_per_user,
};
use cascade_vae::rng::RngStream;

fn random_result(rng: &mut RngStream, n: usize, id: usize) -> RankResult {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    // targets scattered through the ranking so the metrics are informative
    let picks = [1usize, 7, 18];
    let targets = picks.iter().map(|&r| order[r.min(n - 1)]).collect();
    RankResult {
        cascade_id: format!("c{id}"),
        ranked: order.iter().enumerate().map(|(r, &u)| (u, (n - r) as f64)).collect(),
        targets,
        num_seeds: 2,
        seed_pct: 0.2,
    }
}

fn main() -> cascade_vae::Result<()> {
    let mut rng = RngStream::new(9);
    let results: Vec<RankResult> = (0..40).map(|i| random_result(&mut rng, 30, i)).collect();

    let first = &results[0];
    println!(
        "first episode: AP@10 {:.4}, Recall@10 {:.4}",
        average_precision_at_k(first, 10).unwrap(),
        recall_at_k(first, 10).unwrap()
    );
    println!("MAP@10 over {} episodes: {:.4}", results.len(), mean_average_precision(&results, 10).mean);

    // per-user recall within the top 15, grouped into activity quartiles
    let recall = target_recall_per_user(&results, 15);
    let activity: BTreeMap<usize, f64> = recall.keys().map(|&u| (u, (u % 7) as f64)).collect();
    let report = quartile_report(&recall, &activity, "activity_level")?;
    println!("\nquartile means ({}):", report.grouping);
    for (q, (mean, count)) in report.means.iter().zip(&report.counts).enumerate() {
        println!("  Q{} ({count} users): {mean:.4}", q + 1);
    }
    Ok(())
}
