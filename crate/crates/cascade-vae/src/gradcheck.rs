//! Gradient integrity checks: the analytic gradients of the full training
//! objective against central finite differences, per tensor.

use std::collections::BTreeMap;

use crate::cascade::Episode;
use crate::config::TrainConfig;
use crate::diffusion::{
    build_diffusion_loglik, build_fusion, build_social_reg, register_diffusion_nodes,
};
use crate::error::Result;
use crate::graph::{normalized_laplacian, NormalizedView, SocialNetwork};
use crate::params::{finite_diff_grad, ParamStore};
use crate::rng::RngStream;
use crate::synth::{generate_ba, simulate_ic, BaParams, IcParams};
use crate::tape::{NodeId, Tape};
use crate::temporal::PositionalTable;
use crate::tensor::Tensor;
use crate::vae::{
    build_decode_mlp, build_kl, build_posterior, build_recon_loglik_ip, build_recon_loglik_mlp,
    build_sample_z, DecoderKind,
};

/// Which part of the training objective to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Reconstruction log-likelihood minus KL.
    Vae,
    /// Sum of episode diffusion log-likelihoods.
    Diffusion,
    /// Quadratic penalties, with `mu` coupled through the encoder.
    SocialReg,
    /// All of the above on one tape.
    Full,
}

/// Selected objective terms on one tape: reconstruction - KL + sum of episode
/// diffusion log-likelihoods - social regularizer, with the regularizer's
/// `mu` coupled to the encoder so gradients reach every tensor.
pub fn build_objective(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &TrainConfig,
    net: &SocialNetwork,
    view: &NormalizedView,
    episodes: &[Episode],
    eps: &Tensor,
    pe: &mut PositionalTable,
    which: Objective,
) -> Result<NodeId> {
    let spec = cfg.vae_spec();
    let diff = cfg.diffusion_spec();
    let mut terms: Option<NodeId> = None;
    let add_term = |tape: &mut Tape, t: NodeId, acc: &mut Option<NodeId>| {
        *acc = Some(match *acc {
            None => t,
            Some(a) => tape.add(a, t),
        });
    };

    let need_posterior = matches!(which, Objective::Vae | Objective::SocialReg | Objective::Full);
    let mu = if need_posterior {
        let (mu, lv) = build_posterior(tape, store, &spec, view)?;
        if matches!(which, Objective::Vae | Objective::Full) {
            let z = build_sample_z(tape, mu, lv, eps);
            let recon = match spec.decoder {
                DecoderKind::Mlp => {
                    let out = build_decode_mlp(tape, store, &spec, z)?;
                    build_recon_loglik_mlp(tape, view, out, spec.beta)?
                }
                DecoderKind::InnerProduct => {
                    let (pos, neg) = crate::vae::logistic_masks(net, spec.beta);
                    build_recon_loglik_ip(tape, z, &(pos.into(), neg.into()))?
                }
            };
            let kl = build_kl(tape, mu, lv);
            let vae_term = tape.sub(recon, kl);
            add_term(tape, vae_term, &mut terms);
        }
        Some(mu)
    } else {
        None
    };

    if matches!(which, Objective::Diffusion | Objective::SocialReg | Objective::Full) {
        let nodes = register_diffusion_nodes(tape, store, &diff);
        if matches!(which, Objective::Diffusion | Objective::Full) {
            for ep in episodes {
                let (h, _) = build_fusion(tape, &nodes, &diff, &ep.seeds, pe)?;
                let negs = net.num_users - ep.targets.len() - ep.seeds.len();
                let eta = diff.resolve_eta(ep.targets.len(), negs);
                let ll = build_diffusion_loglik(tape, h, nodes.v_r, ep, net.num_users, eta)?;
                add_term(tape, ll, &mut terms);
            }
        }
        if matches!(which, Objective::SocialReg | Objective::Full) {
            let reg = build_social_reg(tape, &nodes, &diff, mu.expect("posterior built"));
            let neg_reg = tape.scale(reg, -1.0);
            add_term(tape, neg_reg, &mut terms);
        }
    }
    Ok(terms.expect("objective has at least one term"))
}

/// Full MAP objective; see [`build_objective`].
pub fn build_full_objective(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &TrainConfig,
    net: &SocialNetwork,
    view: &NormalizedView,
    episodes: &[Episode],
    eps: &Tensor,
    pe: &mut PositionalTable,
) -> Result<NodeId> {
    build_objective(tape, store, cfg, net, view, episodes, eps, pe, Objective::Full)
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max relative error per tensor: `|a - b| / max(1e-8, |a| + |b|)`.
    pub per_tensor: BTreeMap<String, f64>,
    pub threshold: f64,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.per_tensor.values().cloned().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() < self.threshold
    }
}

pub const GRADCHECK_THRESHOLD: f64 = 1e-4;
// large enough that roundoff in the big reconstruction sums stays well
// below the truncation budget
pub const GRADCHECK_FD_STEP: f64 = 1e-4;

/// Compare analytic and finite-difference gradients of the full objective on
/// the given data, for the listed tensors (all when `None`).
pub fn gradcheck(
    cfg: &TrainConfig,
    net: &SocialNetwork,
    episodes: &[Episode],
    tensors: Option<&[String]>,
) -> Result<GradCheckReport> {
    gradcheck_objective(cfg, net, episodes, tensors, Objective::Full)
}

/// [`gradcheck`] restricted to one objective component.
pub fn gradcheck_objective(
    cfg: &TrainConfig,
    net: &SocialNetwork,
    episodes: &[Episode],
    tensors: Option<&[String]>,
    which: Objective,
) -> Result<GradCheckReport> {
    cfg.validate()?;
    let view = normalized_laplacian(net);
    let mut rng = RngStream::new(cfg.seed);
    let mut store = ParamStore::new();
    cfg.vae_spec().init_params(net.num_users, &mut store, &mut rng);
    cfg.diffusion_spec().init_params(net.num_users, &mut store, &mut rng);
    // one fixed noise draw keeps the objective deterministic for the oracle
    let eps = Tensor::from_vec(
        net.num_users,
        cfg.embed_dim,
        rng.normal_vec(net.num_users * cfg.embed_dim),
    );

    let mut pe = PositionalTable::new(cfg.embed_dim, 32)?;
    let mut tape = Tape::new();
    let obj = build_objective(&mut tape, &store, cfg, net, &view, episodes, &eps, &mut pe, which)?;
    let loss = tape.scale(obj, -1.0);
    tape.backward(loss);
    store.zero_grads();
    tape.scatter_grads(&mut store);
    let analytic: BTreeMap<String, Tensor> = store
        .names()
        .iter()
        .map(|n| (n.clone(), store.grad(n).clone()))
        .collect();

    let names: Vec<String> = match tensors {
        Some(list) => list.to_vec(),
        // check only the tensors the component can reach
        None => match which {
            Objective::Vae => cfg.vae_spec().all_param_names(),
            Objective::Diffusion => cfg.diffusion_spec().param_names(),
            Objective::SocialReg | Objective::Full => store.names(),
        },
    };
    let mut per_tensor = BTreeMap::new();
    for name in names {
        let cfg = cfg.clone();
        let view = &view;
        let net = net;
        let eps = &eps;
        let mut pe_fd = PositionalTable::new(cfg.embed_dim, 32)?;
        let loss_fn = |s: &ParamStore| -> f64 {
            let mut t = Tape::new();
            let o = build_objective(&mut t, s, &cfg, net, view, episodes, eps, &mut pe_fd, which)
                .expect("objective builds");
            -t.scalar_value(o)
        };
        let fd = finite_diff_grad(loss_fn, &mut store, &name, GRADCHECK_FD_STEP);
        let a = &analytic[&name];
        let mut worst = 0.0f64;
        for (x, y) in a.data.iter().zip(&fd.data) {
            let rel = (x - y).abs() / (x.abs() + y.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        per_tensor.insert(name, worst);
    }
    Ok(GradCheckReport {
        per_tensor,
        threshold: GRADCHECK_THRESHOLD,
    })
}

/// Small deterministic fixture used by the gradient checks: a 20-user
/// preferential-attachment network and 5 episodes from simulated cascades.
pub fn standard_fixture(seed: u64) -> Result<(SocialNetwork, Vec<Episode>)> {
    let net = generate_ba(&BaParams { n: 20, m: 2, seed })?;
    let params = IcParams { p: 0.3, target_len: 5, num_cascades: 10, seed: seed + 1 };
    let (cascades, _) = simulate_ic(&net, &params)?;
    let mut rng = RngStream::new(seed + 2);
    let mut episodes = crate::cascade::make_all_episodes(&cascades, Some(1), &mut rng);
    episodes.truncate(5);
    assert!(episodes.len() == 5, "fixture produced {} episodes", episodes.len());
    Ok((net, episodes))
}

/// Gradcheck against the standard fixture.
pub fn gradcheck_default(cfg: &TrainConfig, tensors: Option<&[String]>) -> Result<GradCheckReport> {
    let (net, episodes) = standard_fixture(cfg.seed)?;
    gradcheck(cfg, &net, &episodes, tensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::FusionMode;
    use crate::vae::EncoderKind;

    fn cfg(embed: usize) -> TrainConfig {
        TrainConfig {
            embed_dim: embed,
            hidden_dims: vec![embed],
            seed: 17,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn default_config_gradients_match_oracle() {
        let report = gradcheck_default(&cfg(8), None).unwrap();
        assert!(
            report.passed(),
            "max rel err {} per tensor {:?}",
            report.max_error(),
            report.per_tensor
        );
    }

    #[test]
    fn mlp_variant_gradients_match_oracle() {
        let c = TrainConfig {
            encoder: EncoderKind::Mlp,
            decoder: DecoderKind::Mlp,
            ..cfg(8)
        };
        let report = gradcheck_default(&c, None).unwrap();
        assert!(report.passed(), "{:?}", report.per_tensor);
    }

    #[test]
    fn ablation_mode_gradients_match_oracle() {
        for mode in [FusionMode::MeanpoolConcat, FusionMode::SeparateAttentions] {
            let c = TrainConfig { fusion: mode, ..cfg(8) };
            let report = gradcheck_default(&c, None).unwrap();
            assert!(report.passed(), "{mode:?}: {:?}", report.per_tensor);
        }
        let c = TrainConfig { tie_sender_receiver: true, ..cfg(8) };
        let report = gradcheck_default(&c, None).unwrap();
        assert!(report.passed(), "tied: {:?}", report.per_tensor);
    }
}
