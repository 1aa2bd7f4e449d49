//! Sender/receiver variables, co-attentive fusion, diffusion likelihood, and
//! ranked prediction.
//!
//! Each user carries a *sender* and a *receiver* embedding, both regularized
//! toward the posterior mean of their social variable. For an episode with
//! seed activations `I`, the fusion network scores each seed by a bilinear
//! interaction between its sender and temporal vectors,
//! `G_k = tanh(v_s^T W v_t)`, softmax-normalizes the scores into attention
//! weights, and aggregates `h_I = sum_k alpha_k v_t_k`. An inactive user `j`
//! is influenced with probability `sigma(h_I . v_r_j)`.
//!
//! Two ablation fusions are available: mean pooling of the concatenated
//! sender/temporal vectors through a dense layer, and two independent
//! attentions whose context vectors are concatenated and projected.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::rc::Rc;

use crate::cascade::Episode;
use crate::error::{Error, Result};
use crate::graph::Vocab;
use crate::params::ParamStore;
use crate::rng::RngStream;
use crate::tape::{NodeId, Tape};
use crate::temporal::PositionalTable;
use crate::tensor::{sigmoid, Tensor};

/// Seed-aggregation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Coattention,
    MeanpoolConcat,
    SeparateAttentions,
}

/// Positive re-weighting for the diffusion likelihood.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// `|negatives| / |targets|` per episode (class balancing).
    Balanced,
    Fixed(f64),
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DiffusionSpec {
    pub embed_dim: usize,
    pub lambda_s: f64,
    pub lambda_r: f64,
    pub lambda_p: f64,
    pub eta: EtaMode,
    pub mode: FusionMode,
    pub tie_sender_receiver: bool,
    /// Std-dev for embedding initialization.
    pub init_std: f64,
}

impl DiffusionSpec {
    pub fn defaults(embed_dim: usize) -> Self {
        DiffusionSpec {
            embed_dim,
            lambda_s: 0.01,
            lambda_r: 0.1,
            lambda_p: 0.1,
            eta: EtaMode::Balanced,
            mode: FusionMode::Coattention,
            tie_sender_receiver: false,
            init_std: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::config("embed_dim must be positive"));
        }
        for (name, v) in [
            ("lambda_s", self.lambda_s),
            ("lambda_r", self.lambda_r),
            ("lambda_p", self.lambda_p),
        ] {
            if v < 0.0 {
                return Err(Error::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if let EtaMode::Fixed(v) = self.eta {
            if v < 0.0 {
                return Err(Error::config(format!("eta must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn sender_name(&self) -> &'static str {
        if self.tie_sender_receiver {
            "diff.v_sr"
        } else {
            "diff.v_s"
        }
    }

    pub fn receiver_name(&self) -> &'static str {
        if self.tie_sender_receiver {
            "diff.v_sr"
        } else {
            "diff.v_r"
        }
    }

    /// Names of the diffusion-block parameters for this configuration.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec![self.sender_name().to_string()];
        if !self.tie_sender_receiver {
            names.push(self.receiver_name().to_string());
        }
        names.push("diff.v_p".into());
        match self.mode {
            FusionMode::Coattention => names.push("diff.w".into()),
            FusionMode::MeanpoolConcat => {
                names.push("diff.w_mp".into());
                names.push("diff.b_mp".into());
            }
            FusionMode::SeparateAttentions => {
                names.push("diff.w_attn_s".into());
                names.push("diff.w_attn_t".into());
                names.push("diff.w_sep".into());
            }
        }
        names
    }

    pub fn init_params(&self, n: usize, store: &mut ParamStore, rng: &mut RngStream) {
        let d = self.embed_dim;
        store.insert(
            self.sender_name(),
            Tensor::randn(n, d, self.init_std, rng),
        );
        if !self.tie_sender_receiver {
            store.insert(
                self.receiver_name(),
                Tensor::randn(n, d, self.init_std, rng),
            );
        }
        store.insert("diff.v_p", Tensor::randn(n, d, self.init_std, rng));
        match self.mode {
            FusionMode::Coattention => {
                store.insert("diff.w", Tensor::glorot(d, d, rng));
            }
            FusionMode::MeanpoolConcat => {
                store.insert("diff.w_mp", Tensor::glorot(2 * d, d, rng));
                store.insert("diff.b_mp", Tensor::zeros(1, d));
            }
            FusionMode::SeparateAttentions => {
                store.insert("diff.w_attn_s", Tensor::glorot(d, 1, rng));
                store.insert("diff.w_attn_t", Tensor::glorot(d, 1, rng));
                store.insert("diff.w_sep", Tensor::glorot(2 * d, d, rng));
            }
        }
    }

    /// Resolve the positive weight for one episode.
    pub fn resolve_eta(&self, num_targets: usize, num_negatives: usize) -> f64 {
        match self.eta {
            EtaMode::Balanced => {
                if num_targets == 0 {
                    1.0
                } else {
                    num_negatives as f64 / num_targets as f64
                }
            }
            EtaMode::Fixed(v) => v,
        }
    }
}

/// Tape leaves for the diffusion block, registered once per batch so all
/// episode subgraphs share them.
pub struct DiffusionNodes {
    pub v_s: NodeId,
    pub v_r: NodeId,
    pub v_p: NodeId,
    mode: ModeNodes,
}

enum ModeNodes {
    Co { w: NodeId },
    Mean { w: NodeId, b: NodeId },
    Sep { ws: NodeId, wt: NodeId, w: NodeId },
}

pub fn register_diffusion_nodes(
    tape: &mut Tape,
    store: &ParamStore,
    spec: &DiffusionSpec,
) -> DiffusionNodes {
    let v_s = tape.param(store, spec.sender_name());
    let v_r = if spec.tie_sender_receiver {
        v_s
    } else {
        tape.param(store, spec.receiver_name())
    };
    let v_p = tape.param(store, "diff.v_p");
    let mode = match spec.mode {
        FusionMode::Coattention => ModeNodes::Co {
            w: tape.param(store, "diff.w"),
        },
        FusionMode::MeanpoolConcat => ModeNodes::Mean {
            w: tape.param(store, "diff.w_mp"),
            b: tape.param(store, "diff.b_mp"),
        },
        FusionMode::SeparateAttentions => ModeNodes::Sep {
            ws: tape.param(store, "diff.w_attn_s"),
            wt: tape.param(store, "diff.w_attn_t"),
            w: tape.param(store, "diff.w_sep"),
        },
    };
    DiffusionNodes {
        v_s,
        v_r,
        v_p,
        mode,
    }
}

/// Aggregate seed representation `h_I` (a `1 x D` node) plus the attention
/// weights node when the mode produces one.
pub fn build_fusion(
    tape: &mut Tape,
    nodes: &DiffusionNodes,
    spec: &DiffusionSpec,
    seeds: &[(usize, usize)],
    pe: &mut PositionalTable,
) -> Result<(NodeId, Option<NodeId>)> {
    assert!(!seeds.is_empty(), "episode must have at least one seed");
    let idx: Rc<Vec<usize>> = Rc::new(seeds.iter().map(|&(u, _)| u).collect());
    let k = seeds.len();
    let d = spec.embed_dim;

    let vs_sel = tape.gather(nodes.v_s, Rc::clone(&idx));
    let vp_sel = tape.gather(nodes.v_p, idx);
    // positions are the per-episode steps carried by the seeds (1..=k)
    let mut pe_rows = Tensor::zeros(k, d);
    for (i, &(_, step)) in seeds.iter().enumerate() {
        pe_rows.data[i * d..(i + 1) * d].copy_from_slice(pe.row(step)?);
    }
    let pe_rows = tape.constant(pe_rows);
    let vt = tape.add(vp_sel, pe_rows);

    match &nodes.mode {
        ModeNodes::Co { w } => {
            let sw = tape.matmul(vs_sel, *w)?;
            let prod = tape.mul(sw, vt);
            let ones = tape.constant(Tensor::from_vec(d, 1, vec![1.0; d]));
            let scores = tape.matmul(prod, ones)?; // (k, 1): v_s^T W v_t per seed
            let scores = tape.tanh(scores);
            let row = tape.transpose(scores);
            let alpha = tape.softmax_rows(row);
            let h = tape.matmul(alpha, vt)?;
            Ok((h, Some(alpha)))
        }
        ModeNodes::Mean { w, b } => {
            let cat = tape.concat_cols(vs_sel, vt);
            let mean = tape.mean_rows(cat)?;
            let lin = tape.matmul(mean, *w)?;
            let h = tape.add_row(lin, *b);
            Ok((h, None))
        }
        ModeNodes::Sep { ws, wt, w } => {
            let ss = tape.matmul(vs_sel, *ws)?;
            let ss = tape.tanh(ss);
            let ss_row = tape.transpose(ss);
            let alpha_s = tape.softmax_rows(ss_row);
            let st = tape.matmul(vt, *wt)?;
            let st = tape.tanh(st);
            let st_row = tape.transpose(st);
            let alpha_t = tape.softmax_rows(st_row);
            let ctx_s = tape.matmul(alpha_s, vs_sel)?;
            let ctx_t = tape.matmul(alpha_t, vt)?;
            let cat = tape.concat_cols(ctx_s, ctx_t);
            let h = tape.matmul(cat, *w)?;
            Ok((h, None))
        }
    }
}

/// Diffusion log-likelihood of one episode:
/// `sum_{v in C} eta log sigma(h . v_r) + sum_{v in V - C - I} log(1 - sigma(h . v_r))`.
pub fn build_diffusion_loglik(
    tape: &mut Tape,
    h: NodeId,
    v_r: NodeId,
    episode: &Episode,
    num_users: usize,
    eta: f64,
) -> Result<NodeId> {
    let scores = tape.matmul_nt(h, v_r)?; // (1, N)
    let seed_users: BTreeSet<usize> = episode.seed_users().into_iter().collect();
    let mut wpos = Tensor::zeros(1, num_users);
    let mut wneg = Tensor::zeros(1, num_users);
    for j in 0..num_users {
        if episode.targets.contains(&j) {
            wpos.data[j] = eta;
        } else if !seed_users.contains(&j) {
            wneg.data[j] = 1.0;
        }
    }
    let pos = tape.log_sigmoid(scores);
    let pos = tape.mul_const(pos, Rc::new(wpos));
    let neg = tape.log_one_minus_sigmoid(scores);
    let neg = tape.mul_const(neg, Rc::new(wneg));
    let both = tape.add(pos, neg);
    Ok(tape.sum(both))
}

/// Quadratic penalties anchoring the free variables:
/// `sum_i lambda_s/2 ||v_s - mu||^2 + lambda_r/2 ||v_r - mu||^2 + lambda_p/2 ||v_p||^2`.
/// Subtracted from the maximization objective. `mu` may be a constant (the
/// diffusion phase) or an encoder output (the network phase).
pub fn build_social_reg(
    tape: &mut Tape,
    nodes: &DiffusionNodes,
    spec: &DiffusionSpec,
    mu: NodeId,
) -> NodeId {
    let ds = tape.sub(nodes.v_s, mu);
    let ss = tape.sum_of_squares(ds);
    let term_s = tape.scale(ss, spec.lambda_s / 2.0);
    let dr = tape.sub(nodes.v_r, mu);
    let sr = tape.sum_of_squares(dr);
    let term_r = tape.scale(sr, spec.lambda_r / 2.0);
    let sp = tape.sum_of_squares(nodes.v_p);
    let term_p = tape.scale(sp, spec.lambda_p / 2.0);
    let sum = tape.add(term_s, term_r);
    tape.add(sum, term_p)
}

/// Co-attention output for one episode: weights, per-seed scores, and the
/// aggregate representation.
#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub alpha: Vec<f64>,
    pub scores: Vec<f64>,
    pub h: Vec<f64>,
}

/// Forward-only fusion for inspection and prediction.
pub fn coattend(
    store: &ParamStore,
    spec: &DiffusionSpec,
    seeds: &[(usize, usize)],
    pe: &mut PositionalTable,
) -> Result<FusionOutput> {
    let mut tape = Tape::new();
    let nodes = register_diffusion_nodes(&mut tape, store, spec);
    let (h, alpha) = build_fusion(&mut tape, &nodes, spec, seeds, pe)?;
    let h_vec = tape.value(h).data.clone();
    let (alpha_vec, scores) = match alpha {
        Some(a) => {
            let alpha_vec = tape.value(a).data.clone();
            // raw per-seed scores are the softmax input; recompute cheaply
            let scores = alpha_vec.iter().map(|&x| x.ln()).collect();
            (alpha_vec, scores)
        }
        None => (Vec::new(), Vec::new()),
    };
    Ok(FusionOutput {
        alpha: alpha_vec,
        scores,
        h: h_vec,
    })
}

/// `sigma(h . v_r_j)`.
pub fn influence_prob(h: &[f64], v_r_row: &[f64]) -> f64 {
    let dot: f64 = h.iter().zip(v_r_row).map(|(a, b)| a * b).sum();
    sigmoid(dot)
}

/// Ranking of all non-seed users for one episode, descending by score with
/// ties broken by ascending user index.
#[derive(Debug, Clone)]
pub struct RankResult {
    pub cascade_id: String,
    /// `(user, score)` in rank order; excludes exactly the seed users.
    pub ranked: Vec<(usize, f64)>,
    pub targets: BTreeSet<usize>,
    pub num_seeds: usize,
    /// `|I| / (|I| + |C|)`, the observed fraction of the cascade.
    pub seed_pct: f64,
}

pub fn rank_inactive(
    store: &ParamStore,
    spec: &DiffusionSpec,
    episode: &Episode,
    num_users: usize,
    pe: &mut PositionalTable,
) -> Result<RankResult> {
    let fusion = coattend(store, spec, &episode.seeds, pe)?;
    let v_r = store.get(spec.receiver_name());
    let seed_users: BTreeSet<usize> = episode.seed_users().into_iter().collect();
    let mut ranked: Vec<(usize, f64)> = (0..num_users)
        .filter(|j| !seed_users.contains(j))
        .map(|j| {
            let dot: f64 = fusion.h.iter().zip(v_r.row(j)).map(|(a, b)| a * b).sum();
            (j, dot)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let k_total = seed_users.len() + episode.targets.len();
    Ok(RankResult {
        cascade_id: episode.cascade_id.clone(),
        ranked,
        targets: episode.targets.clone(),
        num_seeds: seed_users.len(),
        seed_pct: seed_users.len() as f64 / k_total as f64,
    })
}

/// Write top-K predictions, one line per episode:
/// `cascade_id<TAB>rank,user_id,score;...`.
pub fn write_predictions(
    path: &Path,
    results: &[RankResult],
    vocab: &Vocab,
    k: usize,
) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    for r in results {
        let entries: Vec<String> = r
            .ranked
            .iter()
            .take(k)
            .enumerate()
            .map(|(rank, &(u, s))| format!("{},{},{:.6}", rank + 1, vocab.id_of(u), s))
            .collect();
        writeln!(f, "{}\t{}", r.cascade_id, entries.join(";")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
