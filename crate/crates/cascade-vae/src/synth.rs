//! Synthetic benchmarks: preferential-attachment networks and independent
//! cascade simulation.

use crate::cascade::Cascade;
use crate::error::{Error, Result};
use crate::graph::SocialNetwork;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct BaParams {
    pub n: usize,
    /// Edges attached per new node.
    pub m: usize,
    pub seed: u64,
}

impl BaParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.m >= self.n {
            return Err(Error::config(format!(
                "preferential attachment needs 1 <= m < n, got m={} n={}",
                self.m, self.n
            )));
        }
        Ok(())
    }
}

/// Barabasi-Albert style generator: clique on the first `m` nodes, then each
/// new node attaches `m` edges by degree-proportional sampling without
/// replacement. Total edges: `C(m,2) + (n-m)*m`.
pub fn generate_ba(params: &BaParams) -> Result<SocialNetwork> {
    params.validate()?;
    let (n, m) = (params.n, params.m);
    let mut rng = RngStream::new(params.seed);
    let mut degrees = vec![0usize; n];
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(m * (m - 1) / 2 + (n - m) * m);
    for i in 0..m {
        for j in i + 1..m {
            edges.push((i, j));
            degrees[i] += 1;
            degrees[j] += 1;
        }
    }
    for v in m..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        for _ in 0..m {
            let total: usize = (0..v)
                .filter(|u| !chosen.contains(u))
                .map(|u| degrees[u])
                .sum();
            let pick = if total == 0 {
                // all candidate degrees zero (m=1 attaching to the 1-clique)
                let candidates: Vec<usize> = (0..v).filter(|u| !chosen.contains(u)).collect();
                candidates[rng.below(candidates.len())]
            } else {
                let mut r = rng.below(total);
                let mut pick = usize::MAX;
                for u in (0..v).filter(|u| !chosen.contains(u)) {
                    if r < degrees[u] {
                        pick = u;
                        break;
                    }
                    r -= degrees[u];
                }
                pick
            };
            chosen.push(pick);
            edges.push((pick, v));
            degrees[pick] += 1;
            degrees[v] += 1;
        }
    }
    SocialNetwork::from_edges(n, &edges)
}

/// Two-block stochastic block model: within-block edge probability `p_in`,
/// cross-block `p_out`. Useful for link-prediction sanity checks.
pub fn generate_sbm(
    n: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<SocialNetwork> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::config("block probabilities must lie in [0, 1]"));
    }
    let mut rng = RngStream::new(seed);
    let half = n / 2;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if (i < half) == (j < half) { p_in } else { p_out };
            if rng.uniform() < p {
                edges.push((i, j));
            }
        }
    }
    SocialNetwork::from_edges(n, &edges)
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct IcParams {
    /// Uniform activation probability per edge.
    pub p: f64,
    /// Target cascade length.
    pub target_len: usize,
    pub num_cascades: usize,
    pub seed: u64,
}

impl IcParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::config(format!(
                "activation probability must lie in [0, 1], got {}",
                self.p
            )));
        }
        if self.target_len < 2 {
            return Err(Error::config("target cascade length must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct SimReport {
    /// Cascades dropped because no attempt produced >= 2 activations.
    pub dropped_short: usize,
    /// Cascades truncated to the target length.
    pub truncated: usize,
    /// Total simulation attempts across all cascades.
    pub attempts: usize,
}

const MAX_RESIM: usize = 100;

/// One synchronous independent-cascade run from a random seed node. Each
/// newly active node gets a single chance to activate each inactive neighbor
/// with probability `p`; activation order is round order, ties by draw order.
fn run_ic(net: &SocialNetwork, p: f64, rng: &mut RngStream) -> Vec<usize> {
    let seed = rng.below(net.num_users);
    let mut active = vec![false; net.num_users];
    active[seed] = true;
    let mut order = vec![seed];
    let mut frontier = vec![seed];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for v in net.neighbors(u) {
                if !active[v] && rng.uniform() < p {
                    active[v] = true;
                    next.push(v);
                    order.push(v);
                }
            }
        }
        frontier = next;
    }
    order
}

/// Simulate `num_cascades` cascades, resimulating (up to 100 attempts each)
/// until the length falls in `[0.8 l, 1.2 l]`, otherwise truncating longer
/// runs at `l`. Runs that never reach 2 activations are dropped and counted.
pub fn simulate_ic(net: &SocialNetwork, params: &IcParams) -> Result<(Vec<Cascade>, SimReport)> {
    params.validate()?;
    if net.num_users == 0 {
        return Err(Error::Invalid("network has no users".into()));
    }
    let l = params.target_len as f64;
    let (lo, hi) = (0.8 * l, 1.2 * l);
    let master = RngStream::new(params.seed);
    let mut cascades = Vec::new();
    let mut report = SimReport::default();
    for c in 0..params.num_cascades {
        let mut rng = master.substream(c as u64);
        let mut last: Vec<usize> = Vec::new();
        let mut accepted = false;
        for _ in 0..MAX_RESIM {
            report.attempts += 1;
            last = run_ic(net, params.p, &mut rng);
            let len = last.len() as f64;
            if (lo..=hi).contains(&len) {
                accepted = true;
                break;
            }
        }
        if !accepted && last.len() > params.target_len {
            last.truncate(params.target_len);
            report.truncated += 1;
        }
        if last.len() < 2 {
            report.dropped_short += 1;
            continue;
        }
        cascades.push(Cascade {
            id: format!("ic{c}"),
            activations: last
                .into_iter()
                .enumerate()
                .map(|(step, u)| (u, step + 1))
                .collect(),
        });
    }
    Ok((cascades, report))
}
