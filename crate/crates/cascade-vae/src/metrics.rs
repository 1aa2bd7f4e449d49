//! Ranked-prediction metrics: MAP@K, Recall@K, per-user target recall, and
//! quartile breakdowns by activity level or seed neighbor fraction.

use std::collections::BTreeMap;

use crate::cascade::{Cascade, Episode};
use crate::diffusion::RankResult;
use crate::error::{Error, Result};
use crate::graph::SocialNetwork;

/// `AP@K = (sum over hit ranks r <= K of precision@r) / min(|C|, K)`.
/// Returns `None` when the target set is empty (episode skipped upstream).
pub fn average_precision_at_k(rank: &RankResult, k: usize) -> Option<f64> {
    assert!(k >= 1, "K must be >= 1");
    if rank.targets.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &(user, _)) in rank.ranked.iter().take(k).enumerate() {
        if rank.targets.contains(&user) {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Some(sum / rank.targets.len().min(k) as f64)
}

/// `|top-K intersect C| / |C|`; `None` on empty targets.
pub fn recall_at_k(rank: &RankResult, k: usize) -> Option<f64> {
    assert!(k >= 1, "K must be >= 1");
    if rank.targets.is_empty() {
        return None;
    }
    let hits = rank
        .ranked
        .iter()
        .take(k)
        .filter(|&&(u, _)| rank.targets.contains(&u))
        .count();
    Some(hits as f64 / rank.targets.len() as f64)
}

/// Mean metric over episodes plus the count of skipped empty-target episodes.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct MeanMetric {
    pub mean: f64,
    pub episodes: usize,
    pub skipped_empty_targets: usize,
}

fn mean_over<F: Fn(&RankResult) -> Option<f64>>(results: &[RankResult], f: F) -> MeanMetric {
    let mut total = 0.0;
    let mut n = 0usize;
    let mut skipped = 0usize;
    for r in results {
        match f(r) {
            Some(v) => {
                total += v;
                n += 1;
            }
            None => skipped += 1,
        }
    }
    MeanMetric {
        mean: if n == 0 { 0.0 } else { total / n as f64 },
        episodes: n,
        skipped_empty_targets: skipped,
    }
}

pub fn mean_average_precision(results: &[RankResult], k: usize) -> MeanMetric {
    mean_over(results, |r| average_precision_at_k(r, k))
}

pub fn mean_recall(results: &[RankResult], k: usize) -> MeanMetric {
    mean_over(results, |r| recall_at_k(r, k))
}

/// Per-user fraction of target appearances recovered within the top `K`.
/// Users that never appear as a target are absent from the map.
pub fn target_recall_per_user(results: &[RankResult], k: usize) -> BTreeMap<usize, f64> {
    let mut hits: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in results {
        let top: std::collections::BTreeSet<usize> =
            r.ranked.iter().take(k).map(|&(u, _)| u).collect();
        for &t in &r.targets {
            let e = hits.entry(t).or_insert((0, 0));
            e.1 += 1;
            if top.contains(&t) {
                e.0 += 1;
            }
        }
    }
    hits.into_iter()
        .map(|(u, (h, a))| (u, h as f64 / a as f64))
        .collect()
}

/// Number of cascades each user participates in.
pub fn activity_levels(cascades: &[Cascade], num_users: usize) -> Vec<usize> {
    let mut counts = vec![0usize; num_users];
    for c in cascades {
        for &(u, _) in &c.activations {
            counts[u] += 1;
        }
    }
    counts
}

/// For each user, the mean over training episodes in which the user is a
/// target of the fraction of seeds that are direct graph neighbors.
/// Users with no target appearances are absent.
pub fn seed_neighbor_fractions(
    episodes: &[Episode],
    net: &SocialNetwork,
) -> BTreeMap<usize, f64> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for ep in episodes {
        let seeds = ep.seed_users();
        for &t in &ep.targets {
            let nbr = seeds.iter().filter(|&&s| net.has_edge(t, s)).count();
            let frac = nbr as f64 / seeds.len() as f64;
            let e = acc.entry(t).or_insert((0.0, 0));
            e.0 += frac;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(u, (s, n))| (u, s / n as f64))
        .collect()
}

/// Nearest-rank percentile of sorted values (1-based `ceil(p/100 * n)`).
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    sorted[idx - 1]
}

/// Quartile index (0..4) per value: splits at the 25/50/75 percentiles with
/// ties assigned to the lower quartile.
pub fn quartile_assignment(values: &[f64]) -> Result<Vec<usize>> {
    if values.len() < 4 {
        return Err(Error::Invalid(format!(
            "quartile split needs >= 4 users, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = [
        nearest_rank(&sorted, 25.0),
        nearest_rank(&sorted, 50.0),
        nearest_rank(&sorted, 75.0),
    ];
    Ok(values
        .iter()
        .map(|&v| q.iter().position(|&c| v <= c).unwrap_or(3))
        .collect())
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct QuartileReport {
    pub grouping: String,
    pub means: [f64; 4],
    pub counts: [usize; 4],
    /// Users with a metric value but no grouping statistic.
    pub excluded_users: usize,
}

/// Per-quartile mean of `metric`, grouping users by `stat`. Users missing
/// from `stat` are excluded and counted.
pub fn quartile_report(
    metric: &BTreeMap<usize, f64>,
    stat: &BTreeMap<usize, f64>,
    grouping: &str,
) -> Result<QuartileReport> {
    let users: Vec<usize> = metric.keys().copied().filter(|u| stat.contains_key(u)).collect();
    let excluded = metric.len() - users.len();
    let values: Vec<f64> = users.iter().map(|u| stat[u]).collect();
    let assign = quartile_assignment(&values)?;
    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    for (i, &u) in users.iter().enumerate() {
        sums[assign[i]] += metric[&u];
        counts[assign[i]] += 1;
    }
    let mut means = [0.0; 4];
    for q in 0..4 {
        means[q] = if counts[q] == 0 { 0.0 } else { sums[q] / counts[q] as f64 };
    }
    Ok(QuartileReport {
        grouping: grouping.to_string(),
        means,
        counts,
        excluded_users: excluded,
    })
}

/// One row of the evaluation report for a single cutoff.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MetricRow {
    pub k: usize,
    pub map: MeanMetric,
    pub recall: MeanMetric,
}

/// Metrics for one seed-percentage slice of the test set.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SeedPctBlock {
    pub seed_pct: f64,
    pub episodes: usize,
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub blocks: Vec<SeedPctBlock>,
    pub quartiles: Vec<QuartileReport>,
}

pub fn metric_rows(results: &[RankResult], ks: &[usize]) -> Vec<MetricRow> {
    ks.iter()
        .map(|&k| MetricRow {
            k,
            map: mean_average_precision(results, k),
            recall: mean_recall(results, k),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use std::collections::BTreeSet;

    fn rank(order: &[usize], targets: &[usize]) -> RankResult {
        let n = order.len();
        RankResult {
            cascade_id: "t".into(),
            ranked: order
                .iter()
                .enumerate()
                .map(|(i, &u)| (u, (n - i) as f64))
                .collect(),
            targets: targets.iter().copied().collect(),
            num_seeds: 1,
            seed_pct: 0.5,
        }
    }

    /// O(N*K) reference implementation.
    fn ap_oracle(rank: &RankResult, k: usize) -> Option<f64> {
        if rank.targets.is_empty() {
            return None;
        }
        let mut sum = 0.0;
        for r in 1..=k.min(rank.ranked.len()) {
            let (u, _) = rank.ranked[r - 1];
            if rank.targets.contains(&u) {
                let hits_to_r = rank.ranked[..r]
                    .iter()
                    .filter(|&&(x, _)| rank.targets.contains(&x))
                    .count();
                sum += hits_to_r as f64 / r as f64;
            }
        }
        Some(sum / rank.targets.len().min(k) as f64)
    }

    fn recall_oracle(rank: &RankResult, k: usize) -> Option<f64> {
        if rank.targets.is_empty() {
            return None;
        }
        let mut hits = 0;
        for r in 0..k.min(rank.ranked.len()) {
            if rank.targets.contains(&rank.ranked[r].0) {
                hits += 1;
            }
        }
        Some(hits as f64 / rank.targets.len() as f64)
    }

    #[test]
    fn worked_ap_example() {
        // targets at ranks 1 and 3, K=10: (1/1 + 2/3)/2
        let r = rank(&[0, 1, 2, 3, 4], &[0, 2]);
        let ap = average_precision_at_k(&r, 10).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((ap - 0.83333).abs() < 1e-5);
    }

    #[test]
    fn ap_boundary_cases() {
        // no target in top-K
        let r = rank(&[0, 1, 2, 3], &[3]);
        assert_eq!(average_precision_at_k(&r, 2).unwrap(), 0.0);
        // perfect ranking
        let r = rank(&[5, 6, 0, 1], &[5, 6]);
        assert_eq!(average_precision_at_k(&r, 10).unwrap(), 1.0);
        // empty targets skipped
        let r = rank(&[0, 1], &[]);
        assert!(average_precision_at_k(&r, 5).is_none());
    }

    #[test]
    fn recall_examples() {
        let r = rank(&[0, 1, 2, 3, 4, 5], &[0, 2, 5]);
        assert!((recall_at_k(&r, 5).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(recall_at_k(&r, 6).unwrap(), 1.0);
        let r = rank(&[0, 1, 2], &[2]);
        assert_eq!(recall_at_k(&r, 1).unwrap(), 0.0);
    }

    #[test]
    fn matches_oracle_on_random_instances() {
        let mut rng = RngStream::new(42);
        for _ in 0..1000 {
            let n = 3 + rng.below(30);
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            let targets: Vec<usize> = (0..n).filter(|_| rng.uniform() < 0.3).collect();
            let k = 1 + rng.below(n + 3);
            let r = rank(&order, &targets);
            match (average_precision_at_k(&r, k), ap_oracle(&r, k)) {
                (Some(a), Some(b)) => assert_eq!(a, b),
                (None, None) => {}
                _ => panic!("skip disagreement"),
            }
            match (recall_at_k(&r, k), recall_oracle(&r, k)) {
                (Some(a), Some(b)) => assert_eq!(a, b),
                (None, None) => {}
                _ => panic!("skip disagreement"),
            }
        }
    }

    #[test]
    fn recall_monotone_in_k() {
        let mut rng = RngStream::new(7);
        for _ in 0..200 {
            let mut order: Vec<usize> = (0..20).collect();
            rng.shuffle(&mut order);
            let targets: Vec<usize> = (0..20).filter(|_| rng.uniform() < 0.25).collect();
            if targets.is_empty() {
                continue;
            }
            let r = rank(&order, &targets);
            let mut prev = 0.0;
            for k in 1..=20 {
                let v = recall_at_k(&r, k).unwrap();
                assert!(v + 1e-15 >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn map_depends_only_on_order() {
        let base = rank(&[3, 1, 4, 0, 2], &[1, 2]);
        let mut scaled = base.clone();
        for (_, s) in scaled.ranked.iter_mut() {
            *s *= 1000.0;
        }
        for k in [1, 3, 5] {
            assert_eq!(
                average_precision_at_k(&base, k),
                average_precision_at_k(&scaled, k)
            );
        }
    }

    #[test]
    fn mean_skips_and_counts_empty_targets() {
        let results = vec![rank(&[0, 1], &[0]), rank(&[0, 1], &[])];
        let m = mean_average_precision(&results, 5);
        assert_eq!(m.episodes, 1);
        assert_eq!(m.skipped_empty_targets, 1);
        assert_eq!(m.mean, 1.0);
    }

    #[test]
    fn per_user_recall_and_aggregate_counterexample() {
        // user 7: targeted twice, hit once; user 8: targeted once, hit once
        let results = vec![
            rank(&[7, 1, 2], &[7]),
            rank(&[1, 2, 7], &[7]),
            rank(&[8, 1, 2], &[8]),
        ];
        let per_user = target_recall_per_user(&results, 1);
        assert_eq!(per_user[&7], 0.5);
        assert_eq!(per_user[&8], 1.0);
        assert!(!per_user.contains_key(&1));
        let mean_of_users: f64 = per_user.values().sum::<f64>() / per_user.len() as f64;
        let pooled = 2.0 / 3.0; // 2 hits out of 3 appearances
        assert!((mean_of_users - 0.75).abs() < 1e-12);
        assert!((mean_of_users - pooled).abs() > 1e-3);
    }

    #[test]
    fn quartile_percentile_arithmetic() {
        // 8 users with activity 1..8: Q1 = {1,2}, Q4 = {7,8}
        let values: Vec<f64> = (1..=8).map(|v| v as f64).collect();
        let assign = quartile_assignment(&values).unwrap();
        assert_eq!(assign, vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn quartile_ties_go_low_and_uniform_metric_is_flat() {
        let values = vec![1.0, 1.0, 1.0, 2.0, 3.0, 4.0];
        let assign = quartile_assignment(&values).unwrap();
        // 25th percentile value is 1.0; every tied 1.0 lands in Q1
        assert_eq!(&assign[..3], &[0, 0, 0]);

        let metric: BTreeMap<usize, f64> = (0..8).map(|u| (u, 0.4)).collect();
        let stat: BTreeMap<usize, f64> = (0..8).map(|u| (u, u as f64)).collect();
        let rep = quartile_report(&metric, &stat, "activity_level").unwrap();
        for q in 0..4 {
            assert!((rep.means[q] - 0.4).abs() < 1e-12);
            assert_eq!(rep.counts[q], 2);
        }
        assert_eq!(rep.excluded_users, 0);
    }

    #[test]
    fn quartile_excludes_users_without_stat() {
        let metric: BTreeMap<usize, f64> = (0..6).map(|u| (u, u as f64)).collect();
        // user 5 has no grouping statistic (e.g. never in training data)
        let stat: BTreeMap<usize, f64> = (0..5).map(|u| (u, u as f64)).collect();
        let rep = quartile_report(&metric, &stat, "seed_neighbor_fraction").unwrap();
        assert_eq!(rep.excluded_users, 1);
        assert_eq!(rep.counts.iter().sum::<usize>(), 5);
    }

    #[test]
    fn quartile_needs_four_users() {
        assert!(quartile_assignment(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn activity_and_seed_neighbor_stats() {
        use crate::cascade::Cascade;
        let cascades = vec![
            Cascade {
                id: "a".into(),
                activations: vec![(0, 1), (1, 2), (2, 3)],
            },
            Cascade {
                id: "b".into(),
                activations: vec![(1, 1), (3, 2)],
            },
        ];
        let act = activity_levels(&cascades, 5);
        assert_eq!(act, vec![1, 2, 1, 1, 0]);

        // path graph 0-1-2: target 2 with seeds {0,1} has 1/2 neighbor seeds
        let net = SocialNetwork::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let ep = Episode {
            cascade_id: "a".into(),
            seeds: vec![(0, 1), (1, 2)],
            targets: BTreeSet::from([2]),
        };
        let frac = seed_neighbor_fractions(&[ep], &net);
        assert_eq!(frac[&2], 0.5);
        assert!(!frac.contains_key(&0));
    }
}
