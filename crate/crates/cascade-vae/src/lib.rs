//! Diffusion prediction on social networks.
//!
//! This crate models how information spreads through a social graph by
//! combining two latent factors per user: a *social* embedding learned with a
//! variational graph autoencoder (homophily), and a *temporal* embedding built
//! from sinusoidal position encodings plus a trainable popularity offset
//! (influence). Given an observed prefix of a cascade, a co-attentive fusion
//! network aggregates the seed users into a single representation and ranks
//! every inactive user by their probability of being influenced.
//!
//! The main entry points are:
//!
//! - [`graph`]: social network ingestion and normalized adjacency views
//! - [`cascade`]: cascade files, training episodes, dataset splits
//! - [`vae`]: the graph autoencoder (MLP+MLP and GCN+inner-product variants)
//! - [`diffusion`]: co-attention, diffusion likelihood, ranking
//! - [`train`]: block coordinate ascent over the two parameter blocks
//! - [`metrics`]: MAP@K / Recall@K and quartile analyses
//! - [`synth`]: synthetic benchmarks (preferential attachment + independent
//!   cascade simulation)
//!
//! Every capability has a runnable example under `examples/`; see the README
//! for the full list. A thin `cascade-vae` binary exposes the same pipeline as
//! subcommands (`synth`, `pretrain`, `train`, `predict`, `evaluate`,
//! `gradcheck`).

pub mod cascade;
pub mod checkpoint;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod metrics;
pub mod params;
pub mod rng;
pub mod synth;
pub mod tape;
pub mod temporal;
pub mod tensor;
pub mod train;
pub mod vae;

pub use error::{Error, Result};
