//! Alternating block-coordinate training: autoencoder pretraining, then
//! rounds that alternate a network phase (encoder/decoder weights move,
//! diffusion tensors frozen) with a diffusion phase (sender/receiver/
//! popularity/attention tensors move, encoder side frozen).

use std::fs::File;
use std::io::Write as IoWrite;
use std::path::Path;
use std::time::Instant;

use crate::cascade::{make_all_episodes, seed_slice, split_dataset, Cascade, Episode};
use crate::config::TrainConfig;
use crate::diffusion::{
    build_diffusion_loglik, build_fusion, build_social_reg, rank_inactive,
    register_diffusion_nodes,
};
use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, NormalizedView, SocialNetwork};
use crate::metrics::mean_average_precision;
use crate::params::{adam_step, AdamConfig, ParamStore};
use crate::rng::RngStream;
use crate::tape::Tape;
use crate::temporal::PositionalTable;
use crate::tensor::Tensor;
use crate::vae::{
    build_kl, build_posterior, build_recon_loglik_ip, build_recon_loglik_mlp, build_decode_mlp,
    build_sample_z, compute_posterior, logistic_masks, pretrain_vae, DecoderKind, SocialPosterior,
};

#[derive(Debug, Clone)]
pub struct LogRow {
    pub epoch: usize,
    pub phase: &'static str,
    /// Negated objective (lower is better).
    pub loss: f64,
    pub val_map10: f64,
    pub wall_secs: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub store: ParamStore,
    pub posterior: SocialPosterior,
    pub pretrain_curve: Vec<f64>,
    pub log: Vec<LogRow>,
    pub val_map10: f64,
    pub epochs_run: usize,
    /// Set when training stopped on a non-finite value; the store holds the
    /// last finite state.
    pub aborted: Option<String>,
}

/// One full-batch ascent step on the encoder/decoder weights with the
/// diffusion tensors held constant. The coupling terms
/// `-lambda_s/2 ||v_s - mu||^2 - lambda_r/2 ||v_r - mu||^2` pull the
/// posterior mean toward the diffusion embeddings. Returns the negated
/// objective value.
pub fn network_phase(
    store: &mut ParamStore,
    cfg: &TrainConfig,
    net: &SocialNetwork,
    view: &NormalizedView,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    let spec = cfg.vae_spec();
    let diff = cfg.diffusion_spec();
    let n = net.num_users;
    let eps = Tensor::from_vec(n, cfg.embed_dim, rng.normal_vec(n * cfg.embed_dim));

    let mut tape = Tape::new();
    let (mu, lv) = build_posterior(&mut tape, store, &spec, view)?;
    let z = build_sample_z(&mut tape, mu, lv, &eps);
    let recon = match spec.decoder {
        DecoderKind::Mlp => {
            let out = build_decode_mlp(&mut tape, store, &spec, z)?;
            build_recon_loglik_mlp(&mut tape, view, out, spec.beta)?
        }
        DecoderKind::InnerProduct => {
            let (pos, neg) = logistic_masks(net, spec.beta);
            build_recon_loglik_ip(&mut tape, z, &(pos.into(), neg.into()))?
        }
    };
    let kl = build_kl(&mut tape, mu, lv);
    let mut obj = tape.sub(recon, kl);
    // diffusion tensors enter as constants here; only mu carries gradient
    let vs = tape.constant(store.get(diff.sender_name()).clone());
    let ds = tape.sub(vs, mu);
    let ss = tape.sum_of_squares(ds);
    let cs = tape.scale(ss, cfg.lambda_s / 2.0);
    obj = tape.sub(obj, cs);
    let vr = tape.constant(store.get(diff.receiver_name()).clone());
    let dr = tape.sub(vr, mu);
    let sr = tape.sum_of_squares(dr);
    let cr = tape.scale(sr, cfg.lambda_r / 2.0);
    obj = tape.sub(obj, cr);

    let value = tape.scalar_value(obj);
    if !value.is_finite() {
        return Err(Error::NonFinite {
            tensor: "network objective".into(),
            context: "network_phase".into(),
        });
    }
    let loss = tape.scale(obj, -1.0);
    tape.backward(loss);
    store.zero_grads();
    tape.scatter_grads(store);
    adam_step(store, adam, &spec.all_param_names())?;
    Ok(-value)
}

/// One pass over all episodes in batches, updating only the diffusion
/// tensors. `mu` is the current posterior mean, treated as a constant.
/// Returns the mean negated per-batch objective.
pub fn diffusion_phase(
    store: &mut ParamStore,
    cfg: &TrainConfig,
    episodes: &[Episode],
    num_users: usize,
    mu: &Tensor,
    pe: &mut PositionalTable,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    let diff = cfg.diffusion_spec();
    let names = diff.param_names();
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    rng.shuffle(&mut order);
    let mut total_loss = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(cfg.episode_batch) {
        let mut tape = Tape::new();
        let nodes = register_diffusion_nodes(&mut tape, store, &diff);
        let mut obj = None;
        for &i in chunk {
            let ep = &episodes[i];
            let (h, _) = build_fusion(&mut tape, &nodes, &diff, &ep.seeds, pe)?;
            let negs = num_users - ep.targets.len() - ep.seeds.len();
            let eta = diff.resolve_eta(ep.targets.len(), negs);
            let ll = build_diffusion_loglik(&mut tape, h, nodes.v_r, ep, num_users, eta)?;
            obj = Some(match obj {
                None => ll,
                Some(acc) => tape.add(acc, ll),
            });
        }
        let mut obj = obj.expect("non-empty batch");
        let mu_node = tape.constant(mu.clone());
        let reg = build_social_reg(&mut tape, &nodes, &diff, mu_node);
        // spread the regularizer across batches so one epoch applies it once
        let frac = chunk.len() as f64 / episodes.len() as f64;
        let reg = tape.scale(reg, frac);
        obj = tape.sub(obj, reg);

        let value = tape.scalar_value(obj);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                tensor: "diffusion objective".into(),
                context: "diffusion_phase".into(),
            });
        }
        let loss = tape.scale(obj, -1.0);
        tape.backward(loss);
        store.zero_grads();
        tape.scatter_grads(store);
        adam_step(store, adam, &names)?;
        total_loss += -value;
        batches += 1;
    }
    Ok(total_loss / batches.max(1) as f64)
}

/// Mean AP@10 over validation episodes; NaN when there are none.
pub fn validation_map10(
    store: &ParamStore,
    cfg: &TrainConfig,
    episodes: &[Episode],
    num_users: usize,
    pe: &mut PositionalTable,
) -> Result<f64> {
    if episodes.is_empty() {
        return Ok(f64::NAN);
    }
    let diff = cfg.diffusion_spec();
    let mut results = Vec::with_capacity(episodes.len());
    for ep in episodes {
        results.push(rank_inactive(store, &diff, ep, num_users, pe)?);
    }
    Ok(mean_average_precision(&results, 10).mean)
}

pub fn train(net: &SocialNetwork, cascades: &[Cascade], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cascades.is_empty() {
        return Err(Error::Invalid("training set has no cascades".into()));
    }
    let n = net.num_users;
    let master = RngStream::new(cfg.seed);
    let mut init_rng = master.substream(0);
    let mut pretrain_rng = master.substream(1);
    let mut episode_rng = master.substream(2);
    let mut phase_rng = master.substream(3);

    // hold out validation cascades when there are enough to split
    let (train_cascades, val_cascades) = if cfg.val_fraction > 0.0 && cascades.len() >= 5 {
        let (tr, va, _) =
            split_dataset(cascades, (1.0 - cfg.val_fraction, cfg.val_fraction, 0.0), cfg.seed)?;
        (tr, va)
    } else {
        (cascades.to_vec(), Vec::new())
    };
    let cap = if cfg.max_episodes_per_cascade == 0 {
        None
    } else {
        Some(cfg.max_episodes_per_cascade)
    };
    let episodes = make_all_episodes(&train_cascades, cap, &mut episode_rng);
    if episodes.is_empty() {
        return Err(Error::Invalid(
            "no training episodes (all cascades shorter than 3)".into(),
        ));
    }
    let val_episodes: Vec<Episode> = val_cascades
        .iter()
        .filter_map(|c| seed_slice(c, cfg.val_seed_pct))
        .collect();

    let vae_spec = cfg.vae_spec();
    let diff_spec = cfg.diffusion_spec();
    let mut store = ParamStore::new();
    vae_spec.init_params(n, &mut store, &mut init_rng);
    diff_spec.init_params(n, &mut store, &mut init_rng);

    let view = normalized_laplacian(net);
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut pe = PositionalTable::new(cfg.embed_dim, 16)?;

    let mut outcome = TrainOutcome {
        store: store.clone(),
        posterior: SocialPosterior {
            mu: Tensor::zeros(n, cfg.embed_dim),
            logvar: Tensor::zeros(n, cfg.embed_dim),
        },
        pretrain_curve: Vec::new(),
        log: Vec::new(),
        val_map10: f64::NAN,
        epochs_run: 0,
        aborted: None,
    };

    match pretrain_vae(
        &mut store,
        &vae_spec,
        net,
        &view,
        cfg.pretrain_epochs,
        &adam,
        &mut pretrain_rng,
    ) {
        Ok(curve) => outcome.pretrain_curve = curve,
        Err(Error::NonFinite { tensor, context }) => {
            outcome.store = store;
            outcome.aborted = Some(format!("{tensor} ({context})"));
            return Ok(outcome);
        }
        Err(e) => return Err(e),
    }

    let mut mu = compute_posterior(&store, &vae_spec, &view)?.mu;
    // warm start coupled embeddings at the homophily posterior mean: with
    // the diffusion term absent, the coupled objective is maximized there.
    // Free variables (lambda = 0) keep their random init.
    if cfg.lambda_s > 0.0 {
        *store.get_mut(diff_spec.sender_name()) = mu.clone();
    }
    if cfg.lambda_r > 0.0 && !cfg.tie_sender_receiver {
        *store.get_mut(diff_spec.receiver_name()) = mu.clone();
    }
    if cfg.lambda_s > 0.0 || cfg.lambda_r > 0.0 {
        // graph-aware start for the temporal side as well
        *store.get_mut("diff.v_p") = mu.clone();
    }
    let mut best_val = f64::NEG_INFINITY;
    let mut best_store = store.clone();
    let mut bad_epochs = 0usize;

    for epoch in 1..=cfg.epochs {
        let last_good = store.clone();
        let t0 = Instant::now();
        let net_loss = if cfg.static_pretrain {
            f64::NAN
        } else {
            match network_phase(&mut store, cfg, net, &view, &adam, &mut phase_rng) {
                Ok(l) => l,
                Err(Error::NonFinite { tensor, context }) => {
                    store = last_good;
                    outcome.aborted = Some(format!("{tensor} ({context})"));
                    break;
                }
                Err(e) => return Err(e),
            }
        };
        if !cfg.static_pretrain {
            mu = compute_posterior(&store, &vae_spec, &view)?.mu;
        }
        let net_secs = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let diff_loss = match diffusion_phase(
            &mut store,
            cfg,
            &episodes,
            n,
            &mu,
            &mut pe,
            &adam,
            &mut phase_rng,
        ) {
            Ok(l) => l,
            Err(Error::NonFinite { tensor, context }) => {
                store = last_good;
                outcome.aborted = Some(format!("{tensor} ({context})"));
                break;
            }
            Err(e) => return Err(e),
        };
        let diff_secs = t1.elapsed().as_secs_f64();

        let val = validation_map10(&store, cfg, &val_episodes, n, &mut pe)?;
        if !cfg.static_pretrain {
            outcome.log.push(LogRow {
                epoch,
                phase: "network",
                loss: net_loss,
                val_map10: val,
                wall_secs: net_secs,
            });
        }
        outcome.log.push(LogRow {
            epoch,
            phase: "diffusion",
            loss: diff_loss,
            val_map10: val,
            wall_secs: diff_secs,
        });
        outcome.epochs_run = epoch;

        if val.is_nan() {
            best_store = store.clone();
        } else if val > best_val {
            best_val = val;
            best_store = store.clone();
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= cfg.patience {
                break;
            }
        }
    }

    if outcome.aborted.is_none() {
        store = best_store;
    }
    outcome.posterior = compute_posterior(&store, &vae_spec, &view)?;
    outcome.val_map10 = if best_val.is_finite() { best_val } else { f64::NAN };
    outcome.store = store;
    Ok(outcome)
}

/// Multiply-accumulate counts dominating one training epoch. `F` is the
/// first hidden width, `E` the directed edge count, `T` the episode count.
#[derive(Debug, Clone, Copy)]
pub struct CostModel {
    pub network: f64,
    pub diffusion: f64,
}

impl CostModel {
    pub fn total(&self) -> f64 {
        self.network + self.diffusion
    }
}

pub fn per_epoch_cost_model(
    net: &SocialNetwork,
    episodes: &[Episode],
    cfg: &TrainConfig,
) -> CostModel {
    let e = (2 * net.edges.len()) as f64;
    let d = cfg.embed_dim as f64;
    let f = *cfg.hidden_dims.first().unwrap_or(&cfg.embed_dim) as f64;
    let t = episodes.len() as f64;
    CostModel {
        network: e * f * f + e * d,
        diffusion: t * d * net.num_users as f64,
    }
}

pub fn write_train_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "epoch\tphase\tloss\tval_map10\twall_secs").map_err(|e| Error::io(path, e))?;
    for r in rows {
        writeln!(
            file,
            "{}\t{}\t{:.9}\t{:.9}\t{:.4}",
            r.epoch, r.phase, r.loss, r.val_map10, r.wall_secs
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_ba, simulate_ic, BaParams, IcParams};

    fn fixture(seed: u64) -> (SocialNetwork, Vec<Cascade>) {
        let net = generate_ba(&BaParams { n: 30, m: 2, seed }).unwrap();
        let params = IcParams { p: 0.25, target_len: 6, num_cascades: 12, seed: seed + 1 };
        let (cascades, _) = simulate_ic(&net, &params).unwrap();
        assert!(cascades.len() >= 6);
        (net, cascades)
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            embed_dim: 8,
            hidden_dims: vec![8],
            epochs: 2,
            pretrain_epochs: 3,
            val_fraction: 0.2,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_leaves_diffusion_params_at_init() {
        let (net, cascades) = fixture(1);
        // free variables: no warm start, so the full diffusion block stays put
        let cfg = TrainConfig { epochs: 0, lambda_s: 0.0, lambda_r: 0.0, ..small_cfg() };
        let out = train(&net, &cascades, &cfg).unwrap();
        // rebuild the init state with the same substream
        let master = RngStream::new(cfg.seed);
        let mut init_rng = master.substream(0);
        let mut fresh = ParamStore::new();
        cfg.vae_spec().init_params(net.num_users, &mut fresh, &mut init_rng);
        cfg.diffusion_spec().init_params(net.num_users, &mut fresh, &mut init_rng);
        let diff_names = cfg.diffusion_spec().param_names();
        let refs: Vec<&str> = diff_names.iter().map(|s| s.as_str()).collect();
        assert_eq!(out.store.checksum(&refs), fresh.checksum(&refs));
        assert_eq!(out.epochs_run, 0);
    }

    #[test]
    fn coupled_embeddings_warm_start_at_posterior_mean() {
        let (net, cascades) = fixture(1);
        let cfg = TrainConfig { epochs: 0, ..small_cfg() };
        let out = train(&net, &cascades, &cfg).unwrap();
        let vae_spec = cfg.vae_spec();
        let view = normalized_laplacian(&net);
        let mu = compute_posterior(&out.store, &vae_spec, &view).unwrap().mu;
        for name in ["diff.v_s", "diff.v_r", "diff.v_p"] {
            assert_eq!(out.store.get(name).data, mu.data, "{name}");
        }
    }

    #[test]
    fn same_seed_gives_identical_loss_logs() {
        let (net, cascades) = fixture(2);
        let cfg = small_cfg();
        let a = train(&net, &cascades, &cfg).unwrap();
        let b = train(&net, &cascades, &cfg).unwrap();
        assert_eq!(a.log.len(), b.log.len());
        for (x, y) in a.log.iter().zip(&b.log) {
            assert!((x.loss - y.loss).abs() <= 1e-12);
            assert!(
                (x.val_map10 - y.val_map10).abs() <= 1e-12
                    || (x.val_map10.is_nan() && y.val_map10.is_nan())
            );
        }
        assert_eq!(a.pretrain_curve, b.pretrain_curve);
    }

    #[test]
    fn network_phase_freezes_diffusion_tensors() {
        let (net, cascades) = fixture(3);
        let cfg = small_cfg();
        let master = RngStream::new(cfg.seed);
        let mut init_rng = master.substream(0);
        let mut store = ParamStore::new();
        cfg.vae_spec().init_params(net.num_users, &mut store, &mut init_rng);
        cfg.diffusion_spec().init_params(net.num_users, &mut store, &mut init_rng);
        let view = normalized_laplacian(&net);
        let adam = AdamConfig::default();
        let mut rng = master.substream(9);

        let diff_names = cfg.diffusion_spec().param_names();
        let diff_refs: Vec<&str> = diff_names.iter().map(|s| s.as_str()).collect();
        let vae_names = cfg.vae_spec().all_param_names();
        let vae_refs: Vec<&str> = vae_names.iter().map(|s| s.as_str()).collect();

        let before_diff = store.checksum(&diff_refs);
        let before_vae = store.checksum(&vae_refs);
        network_phase(&mut store, &cfg, &net, &view, &adam, &mut rng).unwrap();
        assert_eq!(store.checksum(&diff_refs), before_diff);
        assert_ne!(store.checksum(&vae_refs), before_vae);

        // and the diffusion phase freezes the encoder side
        let mut episode_rng = master.substream(2);
        let episodes = make_all_episodes(&cascades, None, &mut episode_rng);
        let mu = compute_posterior(&store, &cfg.vae_spec(), &view).unwrap().mu;
        let mut pe = PositionalTable::new(cfg.embed_dim, 16).unwrap();
        let before_vae = store.checksum(&vae_refs);
        let before_diff = store.checksum(&diff_refs);
        diffusion_phase(&mut store, &cfg, &episodes, net.num_users, &mu, &mut pe, &adam, &mut rng)
            .unwrap();
        assert_eq!(store.checksum(&vae_refs), before_vae);
        assert_ne!(store.checksum(&diff_refs), before_diff);
    }

    #[test]
    fn static_pretrain_skips_network_phase() {
        let (net, cascades) = fixture(4);
        let cfg = TrainConfig { static_pretrain: true, ..small_cfg() };
        let out = train(&net, &cascades, &cfg).unwrap();
        assert!(out.log.iter().all(|r| r.phase == "diffusion"));

        // encoder weights identical to a pretrain-only run
        let cfg0 = TrainConfig { epochs: 0, ..cfg.clone() };
        let out0 = train(&net, &cascades, &cfg0).unwrap();
        let vae_names = cfg.vae_spec().all_param_names();
        let refs: Vec<&str> = vae_names.iter().map(|s| s.as_str()).collect();
        assert_eq!(out.store.checksum(&refs), out0.store.checksum(&refs));
    }

    #[test]
    fn nan_in_store_aborts_diffusion_phase() {
        let (net, cascades) = fixture(5);
        let cfg = small_cfg();
        let master = RngStream::new(cfg.seed);
        let mut init_rng = master.substream(0);
        let mut store = ParamStore::new();
        cfg.vae_spec().init_params(net.num_users, &mut store, &mut init_rng);
        cfg.diffusion_spec().init_params(net.num_users, &mut store, &mut init_rng);
        store.get_mut("diff.v_p").data[0] = f64::NAN;
        let mut episode_rng = master.substream(2);
        let episodes = make_all_episodes(&cascades, None, &mut episode_rng);
        let mu = Tensor::zeros(net.num_users, cfg.embed_dim);
        let mut pe = PositionalTable::new(cfg.embed_dim, 16).unwrap();
        let mut rng = master.substream(9);
        let err = diffusion_phase(
            &mut store, &cfg, &episodes, net.num_users, &mu, &mut pe,
            &AdamConfig::default(), &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn cost_model_linearities() {
        let (net, cascades) = fixture(6);
        let cfg = small_cfg();
        let mut rng = RngStream::new(1);
        let episodes = make_all_episodes(&cascades, None, &mut rng);
        let base = per_epoch_cost_model(&net, &episodes, &cfg);
        let doubled: Vec<Episode> = episodes.iter().chain(&episodes).cloned().collect();
        let twice_t = per_epoch_cost_model(&net, &doubled, &cfg);
        assert!((twice_t.diffusion - 2.0 * base.diffusion).abs() < 1e-9);
        let cfg2 = TrainConfig { embed_dim: 16, ..cfg.clone() };
        let twice_d = per_epoch_cost_model(&net, &episodes, &cfg2);
        assert!((twice_d.diffusion - 2.0 * base.diffusion).abs() < 1e-9);
    }

    #[test]
    fn train_log_roundtrip_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train_log.tsv");
        let rows = vec![LogRow {
            epoch: 1,
            phase: "diffusion",
            loss: 2.5,
            val_map10: 0.125,
            wall_secs: 0.01,
        }];
        write_train_log(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "epoch\tphase\tloss\tval_map10\twall_secs");
        assert!(lines.next().unwrap().starts_with("1\tdiffusion\t2.5"));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let (net, _) = fixture(7);
        assert!(train(&net, &[], &small_cfg()).is_err());
    }
}
