//! Training configuration: JSON-serializable, strict about unknown keys, and
//! hashed into output manifests.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::diffusion::{DiffusionSpec, EtaMode, FusionMode};
use crate::error::{Error, Result};
use crate::vae::{DecoderKind, EncoderKind, VaeSpec};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Latent/embedding dimensionality D.
    pub embed_dim: usize,
    /// Encoder hidden widths (decoder mirrors them for the MLP variant).
    pub hidden_dims: Vec<usize>,
    pub encoder: EncoderKind,
    pub decoder: DecoderKind,
    /// Observed-link confidence weight (>= 1).
    pub beta: f64,
    pub lambda_s: f64,
    pub lambda_r: f64,
    pub lambda_p: f64,
    pub eta: EtaMode,
    pub fusion: FusionMode,
    pub tie_sender_receiver: bool,
    /// Skip the network phase after pretraining; posterior means stay fixed.
    pub static_pretrain: bool,
    pub lr: f64,
    pub user_batch: usize,
    pub episode_batch: usize,
    /// Outer alternation rounds (each = one network + one diffusion pass).
    pub epochs: usize,
    pub pretrain_epochs: usize,
    /// Early-stop patience on validation MAP@10.
    pub patience: usize,
    /// Fraction of cascades held out for validation.
    pub val_fraction: f64,
    /// Seed fraction used when slicing validation cascades into episodes.
    pub val_seed_pct: f64,
    /// Cap on episodes generated per cascade (0 = all).
    pub max_episodes_per_cascade: usize,
    pub seed: u64,
    /// Std-dev for diffusion embedding initialization.
    pub init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embed_dim: 64,
            hidden_dims: vec![64],
            encoder: EncoderKind::Gcn,
            decoder: DecoderKind::InnerProduct,
            beta: 10.0,
            lambda_s: 0.01,
            lambda_r: 0.1,
            lambda_p: 0.1,
            eta: EtaMode::Balanced,
            fusion: FusionMode::Coattention,
            tie_sender_receiver: false,
            static_pretrain: false,
            lr: 1e-3,
            user_batch: 256,
            episode_batch: 64,
            epochs: 50,
            pretrain_epochs: 50,
            patience: 5,
            val_fraction: 0.1,
            val_seed_pct: 0.5,
            max_episodes_per_cascade: 0,
            seed: 1,
            init_std: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn vae_spec(&self) -> VaeSpec {
        VaeSpec {
            encoder: self.encoder,
            decoder: self.decoder,
            embed_dim: self.embed_dim,
            hidden_dims: self.hidden_dims.clone(),
            beta: self.beta,
        }
    }

    pub fn diffusion_spec(&self) -> DiffusionSpec {
        DiffusionSpec {
            embed_dim: self.embed_dim,
            lambda_s: self.lambda_s,
            lambda_r: self.lambda_r,
            lambda_p: self.lambda_p,
            eta: self.eta,
            mode: self.fusion,
            tie_sender_receiver: self.tie_sender_receiver,
            init_std: self.init_std,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.vae_spec().validate()?;
        self.diffusion_spec().validate()?;
        if self.lr <= 0.0 {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.user_batch == 0 || self.episode_batch == 0 {
            return Err(Error::config("batch sizes must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::config(format!(
                "val_fraction must lie in [0, 1), got {}",
                self.val_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.val_seed_pct) || self.val_seed_pct <= 0.0 {
            return Err(Error::config(format!(
                "val_seed_pct must lie in (0, 1), got {}",
                self.val_seed_pct
            )));
        }
        if self.init_std <= 0.0 {
            return Err(Error::config("init_std must be positive"));
        }
        Ok(())
    }

    /// Parse from JSON; unknown keys are rejected with the offending key name
    /// in the message.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        format!("{:x}", h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_roundtrip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        let back = TrainConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_key_rejected_with_name() {
        let err = TrainConfig::from_json(r#"{"embed_dim": 8, "learning_rte": 0.1}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("learning_rte"), "message was: {msg}");
    }

    #[test]
    fn partial_configs_fill_defaults() {
        let cfg = TrainConfig::from_json(r#"{"embed_dim": 16, "beta": 2.0}"#).unwrap();
        assert_eq!(cfg.embed_dim, 16);
        assert_eq!(cfg.beta, 2.0);
        assert_eq!(cfg.user_batch, 256);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(TrainConfig::from_json(r#"{"beta": 0.5}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"lr": 0.0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"lambda_s": -1.0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"encoder": "gcn", "decoder": "mlp"}"#).is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = TrainConfig::default();
        let b = TrainConfig {
            beta: 11.0,
            ..TrainConfig::default()
        };
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn variant_and_eta_tags_parse() {
        let cfg = TrainConfig::from_json(
            r#"{"encoder": "mlp", "decoder": "mlp", "eta": {"fixed": 2.5},
                "fusion": "meanpool_concat", "tie_sender_receiver": true}"#,
        )
        .unwrap();
        assert_eq!(cfg.encoder, EncoderKind::Mlp);
        assert_eq!(cfg.eta, EtaMode::Fixed(2.5));
        assert_eq!(cfg.fusion, FusionMode::MeanpoolConcat);
        assert!(cfg.tie_sender_receiver);
    }
}
