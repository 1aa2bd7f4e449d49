//! Variational graph autoencoder for social homophily.
//!
//! Per-user latent social variables get a unit-normal prior; an inference
//! network maps the graph to a diagonal Gaussian posterior `(mu, logvar)`,
//! and a generative network reconstructs the graph from sampled `Z`. Two
//! pairings are supported:
//!
//! - **MLP + MLP**: encode/decode rows of the normalized Laplacian with a
//!   re-weighted Gaussian likelihood,
//! - **GCN + inner product**: stacked graph convolutions over `A_hat` with a
//!   re-weighted logistic likelihood on edges vs non-edges.
//!
//! The positive re-weighting `beta >= 1` balances the sparse observed links
//! against the overwhelming number of zeros. Non-edges are enumerated exactly
//! at desk scale.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::graph::{NormalizedView, SocialNetwork};
use crate::params::{adam_step, AdamConfig, ParamStore};
use crate::rng::RngStream;
use crate::tape::{NodeId, Tape};
use crate::tensor::{sigmoid, Tensor};

/// Clamp range for the posterior log-variance.
pub const LOGVAR_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Mlp,
    Gcn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Mlp,
    InnerProduct,
}

/// Architecture choice for the autoencoder.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VaeSpec {
    pub encoder: EncoderKind,
    pub decoder: DecoderKind,
    pub embed_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub beta: f64,
}

impl VaeSpec {
    pub fn gcn(embed_dim: usize, hidden: usize, beta: f64) -> Self {
        VaeSpec {
            encoder: EncoderKind::Gcn,
            decoder: DecoderKind::InnerProduct,
            embed_dim,
            hidden_dims: vec![hidden],
            beta,
        }
    }

    pub fn mlp(embed_dim: usize, hidden: usize, beta: f64) -> Self {
        VaeSpec {
            encoder: EncoderKind::Mlp,
            decoder: DecoderKind::Mlp,
            embed_dim,
            hidden_dims: vec![hidden],
            beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_pairing = matches!(
            (self.encoder, self.decoder),
            (EncoderKind::Mlp, DecoderKind::Mlp) | (EncoderKind::Gcn, DecoderKind::InnerProduct)
        );
        if !ok_pairing {
            return Err(Error::config(
                "supported pairings are mlp+mlp and gcn+inner_product",
            ));
        }
        if self.embed_dim == 0 {
            return Err(Error::config("embed_dim must be positive"));
        }
        if self.hidden_dims.is_empty() {
            return Err(Error::config("at least one hidden layer is required"));
        }
        if self.beta < 1.0 {
            return Err(Error::config(format!(
                "beta must be >= 1, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Parameter names owned by the inference network.
    pub fn encoder_param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        match self.encoder {
            EncoderKind::Gcn => {
                for i in 0..self.hidden_dims.len() {
                    names.push(format!("enc.gcn.w{i}"));
                }
                names.push("enc.w_mu".into());
                names.push("enc.w_lv".into());
            }
            EncoderKind::Mlp => {
                for i in 0..self.hidden_dims.len() {
                    names.push(format!("enc.mlp.w{i}"));
                    names.push(format!("enc.mlp.b{i}"));
                }
                names.push("enc.w_out".into());
                names.push("enc.b_out".into());
            }
        }
        names
    }

    /// Parameter names owned by the generative network (empty for the
    /// parameter-free inner product decoder).
    pub fn decoder_param_names(&self) -> Vec<String> {
        match self.decoder {
            DecoderKind::InnerProduct => Vec::new(),
            DecoderKind::Mlp => {
                let mut names = Vec::new();
                for i in 0..self.hidden_dims.len() {
                    names.push(format!("dec.w{i}"));
                    names.push(format!("dec.b{i}"));
                }
                names.push("dec.w_out".into());
                names.push("dec.b_out".into());
                names
            }
        }
    }

    pub fn all_param_names(&self) -> Vec<String> {
        let mut names = self.encoder_param_names();
        names.extend(self.decoder_param_names());
        names
    }

    /// Register freshly initialized encoder/decoder weights.
    pub fn init_params(&self, n: usize, store: &mut ParamStore, rng: &mut RngStream) {
        match self.encoder {
            EncoderKind::Gcn => {
                let mut fan_in = n;
                for (i, &h) in self.hidden_dims.iter().enumerate() {
                    store.insert(&format!("enc.gcn.w{i}"), Tensor::glorot(fan_in, h, rng));
                    fan_in = h;
                }
                store.insert("enc.w_mu", Tensor::glorot(fan_in, self.embed_dim, rng));
                store.insert("enc.w_lv", Tensor::glorot(fan_in, self.embed_dim, rng));
            }
            EncoderKind::Mlp => {
                let mut fan_in = n;
                for (i, &h) in self.hidden_dims.iter().enumerate() {
                    store.insert(&format!("enc.mlp.w{i}"), Tensor::glorot(fan_in, h, rng));
                    store.insert(&format!("enc.mlp.b{i}"), Tensor::zeros(1, h));
                    fan_in = h;
                }
                store.insert("enc.w_out", Tensor::glorot(fan_in, 2 * self.embed_dim, rng));
                store.insert("enc.b_out", Tensor::zeros(1, 2 * self.embed_dim));
            }
        }
        if self.decoder == DecoderKind::Mlp {
            let mut fan_in = self.embed_dim;
            for (i, &h) in self.hidden_dims.iter().rev().enumerate() {
                store.insert(&format!("dec.w{i}"), Tensor::glorot(fan_in, h, rng));
                store.insert(&format!("dec.b{i}"), Tensor::zeros(1, h));
                fan_in = h;
            }
            store.insert("dec.w_out", Tensor::glorot(fan_in, n, rng));
            store.insert("dec.b_out", Tensor::zeros(1, n));
        }
    }
}

/// Posterior parameters `q(Z|G) = N(mu, diag(exp(logvar)))`.
#[derive(Debug, Clone)]
pub struct SocialPosterior {
    pub mu: Tensor,
    pub logvar: Tensor,
}

impl SocialPosterior {
    /// Reparameterized sample `Z = mu + eps * exp(logvar / 2)`.
    pub fn sample(&self, rng: &mut RngStream) -> Tensor {
        let eps = Tensor::from_vec(
            self.mu.rows,
            self.mu.cols,
            rng.normal_vec(self.mu.len()),
        );
        self.sample_with_eps(&eps)
    }

    pub fn sample_with_eps(&self, eps: &Tensor) -> Tensor {
        let data = self
            .mu
            .data
            .iter()
            .zip(&self.logvar.data)
            .zip(&eps.data)
            .map(|((m, lv), e)| m + e * (0.5 * lv).exp())
            .collect();
        Tensor::from_vec(self.mu.rows, self.mu.cols, data)
    }
}

/// Closed-form KL divergence from `q = N(mu, sigma^2)` to the unit prior:
/// `sum 0.5 (mu^2 + sigma^2 - 1 - log sigma^2)`.
pub fn kl_term(post: &SocialPosterior) -> f64 {
    post.mu
        .data
        .iter()
        .zip(&post.logvar.data)
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum()
}

/// Tape nodes for the encoder forward pass: `(mu, logvar)` with the
/// log-variance clamped.
pub fn build_posterior(
    tape: &mut Tape,
    store: &ParamStore,
    spec: &VaeSpec,
    view: &NormalizedView,
) -> Result<(NodeId, NodeId)> {
    match spec.encoder {
        EncoderKind::Gcn => {
            let a_hat = Rc::new(view.a_hat.clone());
            // Identity features make the first layer an embedding of A_hat rows.
            let w0 = tape.param(store, "enc.gcn.w0");
            let mut h = tape.spmm(Rc::clone(&a_hat), w0)?;
            h = tape.tanh(h);
            for i in 1..spec.hidden_dims.len() {
                let w = tape.param(store, &format!("enc.gcn.w{i}"));
                let ha = tape.spmm(Rc::clone(&a_hat), h)?;
                h = tape.matmul(ha, w)?;
                h = tape.tanh(h);
            }
            let ha = tape.spmm(a_hat, h)?;
            let w_mu = tape.param(store, "enc.w_mu");
            let w_lv = tape.param(store, "enc.w_lv");
            let mu = tape.matmul(ha, w_mu)?;
            let lv = tape.matmul(ha, w_lv)?;
            let lv = tape.clamp(lv, -LOGVAR_CLAMP, LOGVAR_CLAMP);
            Ok((mu, lv))
        }
        EncoderKind::Mlp => {
            let x = tape.constant(view.laplacian.to_dense());
            let mut h = x;
            for i in 0..spec.hidden_dims.len() {
                let w = tape.param(store, &format!("enc.mlp.w{i}"));
                let b = tape.param(store, &format!("enc.mlp.b{i}"));
                h = tape.matmul(h, w)?;
                h = tape.add_row(h, b);
                h = tape.tanh(h);
            }
            let w_out = tape.param(store, "enc.w_out");
            let b_out = tape.param(store, "enc.b_out");
            let out = tape.matmul(h, w_out)?;
            let out = tape.add_row(out, b_out);
            let d = spec.embed_dim;
            let mu = tape.slice_cols(out, 0, d);
            let lv = tape.slice_cols(out, d, 2 * d);
            let lv = tape.clamp(lv, -LOGVAR_CLAMP, LOGVAR_CLAMP);
            Ok((mu, lv))
        }
    }
}

/// Posterior values without gradient tracking.
pub fn compute_posterior(
    store: &ParamStore,
    spec: &VaeSpec,
    view: &NormalizedView,
) -> Result<SocialPosterior> {
    let mut tape = Tape::new();
    let (mu, lv) = build_posterior(&mut tape, store, spec, view)?;
    Ok(SocialPosterior {
        mu: tape.value(mu).clone(),
        logvar: tape.value(lv).clone(),
    })
}

/// `z = mu + eps * exp(logvar/2)` on the tape.
pub fn build_sample_z(tape: &mut Tape, mu: NodeId, logvar: NodeId, eps: &Tensor) -> NodeId {
    let half_lv = tape.scale(logvar, 0.5);
    let sigma = tape.exp(half_lv);
    let noise = tape.mul_const(sigma, Rc::new(eps.clone()));
    tape.add(mu, noise)
}

/// `KL(q || N(0, I))` as a scalar node.
pub fn build_kl(tape: &mut Tape, mu: NodeId, logvar: NodeId) -> NodeId {
    let mu_sq = tape.mul(mu, mu);
    let var = tape.exp(logvar);
    let a = tape.add(mu_sq, var);
    let lv1 = tape.add_scalar(logvar, 1.0);
    let inner = tape.sub(a, lv1);
    let total = tape.sum(inner);
    tape.scale(total, 0.5)
}

/// MLP decoder forward: `z -> reconstructed Laplacian rows`.
pub fn build_decode_mlp(
    tape: &mut Tape,
    store: &ParamStore,
    spec: &VaeSpec,
    z: NodeId,
) -> Result<NodeId> {
    let mut h = z;
    for i in 0..spec.hidden_dims.len() {
        let w = tape.param(store, &format!("dec.w{i}"));
        let b = tape.param(store, &format!("dec.b{i}"));
        h = tape.matmul(h, w)?;
        h = tape.add_row(h, b);
        h = tape.tanh(h);
    }
    let w_out = tape.param(store, "dec.w_out");
    let b_out = tape.param(store, "dec.b_out");
    let out = tape.matmul(h, w_out)?;
    Ok(tape.add_row(out, b_out))
}

/// Confidence mask for the Gaussian likelihood: `beta` where `L_ij > 0`,
/// otherwise 1.
pub fn gaussian_confidence_mask(view: &NormalizedView, beta: f64) -> Tensor {
    let n = view.num_users();
    let mut mask = Tensor::zeros(n, n);
    mask.fill(1.0);
    for r in 0..n {
        for (c, v) in view.laplacian.row_entries(r) {
            if v > 0.0 {
                mask.set(r, c, beta);
            }
        }
    }
    mask
}

/// Re-weighted Gaussian log-likelihood:
/// `-sum_i || b_i * (a_i - recon_i) ||^2` (0 at perfect reconstruction).
pub fn build_recon_loglik_mlp(
    tape: &mut Tape,
    view: &NormalizedView,
    recon: NodeId,
    beta: f64,
) -> Result<NodeId> {
    if beta < 1.0 {
        return Err(Error::config(format!("beta must be >= 1, got {beta}")));
    }
    let target = tape.constant(view.laplacian.to_dense());
    let diff = tape.sub(target, recon);
    let weighted = tape.mul_const(diff, Rc::new(gaussian_confidence_mask(view, beta)));
    let sq = tape.sum_of_squares(weighted);
    Ok(tape.scale(sq, -1.0))
}

/// Positive/negative masks for the logistic likelihood over the full
/// `N x N` grid minus the diagonal: `beta` on directed edges, 1 on
/// non-edges.
pub fn logistic_masks(net: &SocialNetwork, beta: f64) -> (Tensor, Tensor) {
    let n = net.num_users;
    let mut pos = Tensor::zeros(n, n);
    let mut neg = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if net.has_edge(i, j) {
                pos.set(i, j, beta);
            } else {
                neg.set(i, j, 1.0);
            }
        }
    }
    (pos, neg)
}

/// Re-weighted logistic log-likelihood of the adjacency under the inner
/// product decoder:
/// `sum_{(i,j) in E} beta log sigma(z_i . z_j) + sum_{(i,j) not in E} log(1 - sigma(z_i . z_j))`.
pub fn build_recon_loglik_ip(
    tape: &mut Tape,
    z: NodeId,
    masks: &(Rc<Tensor>, Rc<Tensor>),
) -> Result<NodeId> {
    let scores = tape.matmul_nt(z, z)?;
    let pos = tape.log_sigmoid(scores);
    let pos = tape.mul_const(pos, Rc::clone(&masks.0));
    let neg = tape.log_one_minus_sigmoid(scores);
    let neg = tape.mul_const(neg, Rc::clone(&masks.1));
    let both = tape.add(pos, neg);
    Ok(tape.sum(both))
}

/// Full autoencoder objective `L_vae = E_q[log p(G|Z)] - KL` with one
/// reparameterized sample (maximization direction).
pub fn build_vae_objective(
    tape: &mut Tape,
    store: &ParamStore,
    spec: &VaeSpec,
    net: &SocialNetwork,
    view: &NormalizedView,
    eps: &Tensor,
) -> Result<NodeId> {
    let (mu, lv) = build_posterior(tape, store, spec, view)?;
    let z = build_sample_z(tape, mu, lv, eps);
    let recon = match spec.decoder {
        DecoderKind::Mlp => {
            let out = build_decode_mlp(tape, store, spec, z)?;
            build_recon_loglik_mlp(tape, view, out, spec.beta)?
        }
        DecoderKind::InnerProduct => {
            let (pos, neg) = logistic_masks(net, spec.beta);
            build_recon_loglik_ip(tape, z, &(Rc::new(pos), Rc::new(neg)))?
        }
    };
    let kl = build_kl(tape, mu, lv);
    Ok(tape.sub(recon, kl))
}

/// Loss curve from pretraining (one objective value per epoch).
pub type PretrainCurve = Vec<f64>;

/// Train the autoencoder alone by single-sample reparameterized gradient
/// ascent on `L_vae`. On divergence (non-finite loss) the store is restored
/// to the last good epoch and an error is returned.
pub fn pretrain_vae(
    store: &mut ParamStore,
    spec: &VaeSpec,
    net: &SocialNetwork,
    view: &NormalizedView,
    epochs: usize,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<PretrainCurve> {
    spec.validate()?;
    let names = spec.all_param_names();
    let n = view.num_users();
    let mut curve = Vec::with_capacity(epochs);
    let mut last_good = store.clone();
    for _ in 0..epochs {
        let eps = Tensor::from_vec(n, spec.embed_dim, rng.normal_vec(n * spec.embed_dim));
        let mut tape = Tape::new();
        let obj = build_vae_objective(&mut tape, store, spec, net, view, &eps)?;
        let value = tape.scalar_value(obj);
        if !value.is_finite() {
            *store = last_good;
            return Err(Error::NonFinite {
                tensor: "vae objective".into(),
                context: "pretrain_vae".into(),
            });
        }
        let loss = tape.scale(obj, -1.0);
        tape.backward(loss);
        store.zero_grads();
        tape.scatter_grads(store);
        adam_step(store, adam, &names)?;
        last_good = store.clone();
        curve.push(value);
    }
    Ok(curve)
}

/// Area under the ROC curve for `(score, is_positive)` pairs; ties share
/// rank. Used to judge held-out link prediction.
pub fn roc_auc(scored: &[(f64, bool)]) -> f64 {
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // average ranks with tie handling
    let n = sorted.len();
    let mut rank_sum_pos = 0.0;
    let mut num_pos = 0usize;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // ranks are 1-based
        for item in &sorted[i..j] {
            if item.1 {
                rank_sum_pos += avg_rank;
                num_pos += 1;
            }
        }
        i = j;
    }
    let num_neg = n - num_pos;
    if num_pos == 0 || num_neg == 0 {
        return 0.5;
    }
    (rank_sum_pos - (num_pos * (num_pos + 1)) as f64 / 2.0) / (num_pos * num_neg) as f64
}

/// Inner-product link probability from embedding rows.
pub fn link_probability(z: &Tensor, i: usize, j: usize) -> f64 {
    let dot: f64 = z.row(i).iter().zip(z.row(j)).map(|(a, b)| a * b).sum();
    sigmoid(dot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalized_laplacian;

    fn small_setup(spec: &VaeSpec) -> (SocialNetwork, NormalizedView, ParamStore, RngStream) {
        let net = SocialNetwork::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let view = normalized_laplacian(&net);
        let mut rng = RngStream::new(21);
        let mut store = ParamStore::new();
        spec.init_params(net.num_users, &mut store, &mut rng);
        (net, view, store, rng)
    }

    #[test]
    fn zero_weights_give_standard_normal_posterior() {
        let spec = VaeSpec::gcn(3, 5, 2.0);
        let (_net, view, mut store, _rng) = small_setup(&spec);
        for name in spec.encoder_param_names() {
            store.get_mut(&name).fill(0.0);
        }
        let post = compute_posterior(&store, &spec, &view).unwrap();
        assert!(post.mu.data.iter().all(|&x| x == 0.0));
        assert!(post.logvar.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reparameterization_identity_and_determinism() {
        let post = SocialPosterior {
            mu: Tensor::from_vec(2, 2, vec![1.0, -2.0, 0.5, 0.0]),
            logvar: Tensor::zeros(2, 2),
        };
        let z = post.sample_with_eps(&Tensor::zeros(2, 2));
        assert_eq!(z.data, post.mu.data);

        let mut r1 = RngStream::new(8);
        let mut r2 = RngStream::new(8);
        assert_eq!(post.sample(&mut r1).data, post.sample(&mut r2).data);
    }

    #[test]
    fn clamped_logvar_keeps_sample_near_mu() {
        let post = SocialPosterior {
            mu: Tensor::from_vec(1, 1, vec![3.0]),
            logvar: Tensor::from_vec(1, 1, vec![-LOGVAR_CLAMP]),
        };
        let eps = Tensor::from_vec(1, 1, vec![1.7]);
        let z = post.sample_with_eps(&eps);
        assert!((z.data[0] - 3.0).abs() <= (-5.0f64).exp() * 1.7 + 1e-12);
    }

    #[test]
    fn kl_zero_at_prior_and_closed_form_case() {
        let zero = SocialPosterior {
            mu: Tensor::zeros(3, 2),
            logvar: Tensor::zeros(3, 2),
        };
        assert_eq!(kl_term(&zero), 0.0);

        let one = SocialPosterior {
            mu: Tensor::from_vec(1, 1, vec![1.0]),
            logvar: Tensor::from_vec(1, 1, vec![0.0]),
        };
        assert!((kl_term(&one) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        // MC estimate of E_q[log q - log p] with a fixed seed.
        let mut rng = RngStream::new(77);
        let post = SocialPosterior {
            mu: Tensor::from_vec(1, 4, vec![0.5, -1.0, 0.2, 1.5]),
            logvar: Tensor::from_vec(1, 4, vec![0.3, -0.5, 0.0, 0.8]),
        };
        let closed = kl_term(&post);
        let samples = 100_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            for d in 0..4 {
                let mu = post.mu.data[d];
                let lv = post.logvar.data[d];
                let sigma = (0.5 * lv).exp();
                let z = mu + rng.normal() * sigma;
                let log_q = -0.5 * ((z - mu) / sigma).powi(2) - lv / 2.0;
                let log_p = -0.5 * z * z;
                acc += log_q - log_p;
            }
        }
        let mc = acc / samples as f64;
        assert!((mc - closed).abs() / closed < 0.01, "mc={mc} closed={closed}");
    }

    #[test]
    fn recon_mlp_worked_example() {
        // one user, a = [0, 1], recon = [0, 0], beta = 2 -> -(2*1)^2 = -4
        let net = SocialNetwork::from_edges(2, &[(0, 1)]).unwrap();
        let view = normalized_laplacian(&net);
        let mut tape = Tape::new();
        let recon = tape.constant(Tensor::zeros(2, 2));
        let ll = build_recon_loglik_mlp(&mut tape, &view, recon, 2.0).unwrap();
        // Both rows contribute: a_0 = [0,1], a_1 = [1,0], each -(2)^2.
        assert!((tape.scalar_value(ll) + 8.0).abs() < 1e-12);
    }

    #[test]
    fn recon_mlp_perfect_reconstruction_is_zero() {
        let net = SocialNetwork::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let view = normalized_laplacian(&net);
        let mut tape = Tape::new();
        let recon = tape.constant(view.laplacian.to_dense());
        let ll = build_recon_loglik_mlp(&mut tape, &view, recon, 5.0).unwrap();
        assert_eq!(tape.scalar_value(ll), 0.0);
    }

    #[test]
    fn recon_mlp_beta_one_is_unweighted() {
        let net = SocialNetwork::from_edges(2, &[(0, 1)]).unwrap();
        let view = normalized_laplacian(&net);
        let mask = gaussian_confidence_mask(&view, 1.0);
        assert!(mask.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn recon_mlp_rejects_beta_below_one() {
        let net = SocialNetwork::from_edges(2, &[(0, 1)]).unwrap();
        let view = normalized_laplacian(&net);
        let mut tape = Tape::new();
        let recon = tape.constant(Tensor::zeros(2, 2));
        assert!(build_recon_loglik_mlp(&mut tape, &view, recon, 0.5).is_err());
    }

    #[test]
    fn recon_ip_all_zero_embeddings() {
        // every term is ln 0.5, scaled by beta on the directed edges
        let net = SocialNetwork::from_edges(3, &[(0, 1)]).unwrap();
        let (pos, neg) = logistic_masks(&net, 5.0);
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(3, 2));
        let ll = build_recon_loglik_ip(&mut tape, z, &(Rc::new(pos), Rc::new(neg))).unwrap();
        // 2 directed edges weighted 5, 4 directed non-edges weighted 1
        let expect = (5.0 * 2.0 + 4.0) * 0.5f64.ln();
        assert!((tape.scalar_value(ll) - expect).abs() < 1e-12);
    }

    #[test]
    fn recon_ip_two_users_worked_example() {
        // 2 users, 1 edge, z_0 . z_1 = 0, beta = 5, no non-edges
        let net = SocialNetwork::from_edges(2, &[(0, 1)]).unwrap();
        let (pos, neg) = logistic_masks(&net, 5.0);
        assert!(neg.data.iter().all(|&v| v == 0.0));
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let ll = build_recon_loglik_ip(&mut tape, z, &(Rc::new(pos), Rc::new(neg))).unwrap();
        let expect = 2.0 * 5.0 * 0.5f64.ln(); // both directed copies of the edge
        assert!((tape.scalar_value(ll) - expect).abs() < 1e-12);
        assert!((5.0 * 0.5f64.ln() + 3.4657).abs() < 1e-3);
    }

    #[test]
    fn recon_ip_perfect_separation_approaches_zero() {
        let net = SocialNetwork::from_edges(2, &[(0, 1)]).unwrap();
        let (pos, neg) = logistic_masks(&net, 1.0);
        let mut tape = Tape::new();
        // huge aligned embeddings -> sigma(z_0 . z_1) -> 1 on the edge
        let z = tape.constant(Tensor::from_vec(2, 1, vec![10.0, 10.0]));
        let ll = build_recon_loglik_ip(&mut tape, z, &(Rc::new(pos), Rc::new(neg))).unwrap();
        let v = tape.scalar_value(ll);
        assert!(v < 0.0 && v > -1e-10);
    }

    #[test]
    fn inner_product_loglik_is_permutation_invariant() {
        let net = SocialNetwork::from_edges(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
        let mut rng = RngStream::new(31);
        let z = Tensor::randn(4, 3, 1.0, &mut rng);
        let (pos, neg) = logistic_masks(&net, 3.0);
        let mut tape = Tape::new();
        let zn = tape.constant(z.clone());
        let ll = build_recon_loglik_ip(&mut tape, zn, &(Rc::new(pos), Rc::new(neg))).unwrap();
        let base = tape.scalar_value(ll);

        // relabel users with the permutation (0 1 2 3) -> (2 0 3 1)
        let perm = [2usize, 0, 3, 1];
        let mut edges_p = Vec::new();
        for &(a, b) in &net.edges {
            edges_p.push((perm[a], perm[b]));
        }
        let net_p = SocialNetwork::from_edges(4, &edges_p).unwrap();
        let mut z_p = Tensor::zeros(4, 3);
        for i in 0..4 {
            z_p.data[perm[i] * 3..(perm[i] + 1) * 3].copy_from_slice(z.row(i));
        }
        let (pos_p, neg_p) = logistic_masks(&net_p, 3.0);
        let mut tape2 = Tape::new();
        let zn2 = tape2.constant(z_p);
        let ll2 =
            build_recon_loglik_ip(&mut tape2, zn2, &(Rc::new(pos_p), Rc::new(neg_p))).unwrap();
        assert!((base - tape2.scalar_value(ll2)).abs() < 1e-9);
    }

    #[test]
    fn pretrain_zero_epochs_leaves_store_unchanged() {
        let spec = VaeSpec::gcn(3, 5, 2.0);
        let (net, view, mut store, mut rng) = small_setup(&spec);
        let before = store.checksum(
            &spec
                .all_param_names()
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>(),
        );
        pretrain_vae(
            &mut store,
            &spec,
            &net,
            &view,
            0,
            &AdamConfig::default(),
            &mut rng,
        )
        .unwrap();
        let after = store.checksum(
            &spec
                .all_param_names()
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>(),
        );
        assert_eq!(before, after);
    }

    #[test]
    fn auc_of_perfect_and_random_scores() {
        let scored = vec![(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        assert_eq!(roc_auc(&scored), 1.0);
        let flipped = vec![(0.9, false), (0.8, false), (0.2, true), (0.1, true)];
        assert_eq!(roc_auc(&flipped), 0.0);
        let tied = vec![(0.5, true), (0.5, false)];
        assert_eq!(roc_auc(&tied), 0.5);
    }
}
