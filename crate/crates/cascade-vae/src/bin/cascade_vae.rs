//! Command line front end: synthetic data generation, autoencoder
//! pretraining, full training, prediction, evaluation, and gradient checks.
//!
//! Exit codes: 0 success, 2 missing input file, 3 invalid configuration,
//! 4 non-finite value during optimization, 1 anything else.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cascade_vae::cascade::{load_cascades, seed_slice, write_cascades};
use cascade_vae::checkpoint::{load_checkpoint, save_checkpoint, Manifest};
use cascade_vae::config::TrainConfig;
use cascade_vae::diffusion::{rank_inactive, write_predictions, RankResult};
use cascade_vae::error::Error;
use cascade_vae::gradcheck::gradcheck_default;
use cascade_vae::graph::{load_edge_list, normalized_laplacian, write_edge_list};
use cascade_vae::metrics::{
    activity_levels, metric_rows, quartile_report, seed_neighbor_fractions,
    target_recall_per_user, EvalReport, SeedPctBlock,
};
use cascade_vae::params::{AdamConfig, ParamStore};
use cascade_vae::rng::RngStream;
use cascade_vae::synth::{generate_ba, simulate_ic, BaParams, IcParams};
use cascade_vae::temporal::PositionalTable;
use cascade_vae::train::{train, write_train_log};
use cascade_vae::vae::pretrain_vae;

#[derive(Parser)]
#[command(name = "cascade-vae", version, about = "Diffusion prediction with variational social embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; omitted fields use defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (1 is the deterministic reference path).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl ConfigArgs {
    fn load(&self) -> Result<TrainConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::load(path)?,
            None => TrainConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic network and simulated cascades.
    Synth {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Per-edge activation probability.
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        /// Target cascade length.
        #[arg(long, default_value_t = 10)]
        len: usize,
        #[arg(long, default_value_t = 100)]
        cascades: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train the autoencoder alone and save its weights.
    Pretrain {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Full alternating training; writes checkpoint, manifest, and log.
    Train {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        cascades: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Rank inactive users for each test cascade slice.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cascades: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        seed_pct: f64,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute ranking metrics over seed percentages and cutoffs.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cascades: PathBuf,
        /// Comma-separated seed fractions.
        #[arg(long, default_value = "0.1,0.3,0.5", value_delimiter = ',')]
        seed_pct: Vec<f64>,
        /// Comma-separated cutoffs.
        #[arg(long, default_value = "10,50,100", value_delimiter = ',')]
        k: Vec<usize>,
        /// Edge list enabling the seed-neighbor-fraction quartile table.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck {
        /// Tensor name, or `all`.
        #[arg(long, default_value = "all")]
        tensor: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 2,
        Error::Config(_) | Error::Parse { .. } | Error::UnknownUser { .. } => 3,
        Error::NonFinite { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Synth { nodes, m, p, len, cascades, seed, out_dir } => {
            let net = generate_ba(&BaParams { n: nodes, m, seed })?;
            let params = IcParams { p, target_len: len, num_cascades: cascades, seed: seed + 1 };
            let (casc, report) = simulate_ic(&net, &params)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let mut vocab = cascade_vae::graph::Vocab::new();
            for i in 0..nodes {
                vocab.intern(&format!("u{i}"));
            }
            write_edge_list(&out_dir.join("edges.tsv"), &net, &vocab)?;
            write_cascades(&out_dir.join("cascades.tsv"), &casc, &vocab)?;
            vocab.save(&out_dir.join("vocab.tsv"))?;
            println!(
                "wrote {} edges, {} cascades ({} dropped short, {} truncated) to {}",
                net.edges.len(),
                casc.len(),
                report.dropped_short,
                report.truncated,
                out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Pretrain { graph, out, cfg } => {
            let cfg = cfg.load()?;
            let (net, vocab) = load_edge_list(&graph)?;
            let view = normalized_laplacian(&net);
            let spec = cfg.vae_spec();
            let master = RngStream::new(cfg.seed);
            let mut store = ParamStore::new();
            spec.init_params(net.num_users, &mut store, &mut master.substream(0));
            let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
            let curve = pretrain_vae(
                &mut store, &spec, &net, &view, cfg.pretrain_epochs, &adam,
                &mut master.substream(1),
            )?;
            let mut manifest = Manifest::new(&cfg, net.num_users, &store);
            if let Some(last) = curve.last() {
                manifest.notes.insert("final_objective".into(), serde_json::json!(last));
            }
            save_checkpoint(&out, &store, &manifest)?;
            vocab.save(&out.join("vocab.tsv"))?;
            println!(
                "pretrained {} epochs, objective {:.4} -> {:.4}",
                curve.len(),
                curve.first().copied().unwrap_or(f64::NAN),
                curve.last().copied().unwrap_or(f64::NAN)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { graph, cascades, out, cfg } => {
            let cfg = cfg.load()?;
            let (net, vocab) = load_edge_list(&graph)?;
            let (casc, load_report) = load_cascades(&cascades, &vocab)?;
            if load_report.unknown_users > 0 {
                eprintln!("note: dropped {} unknown users", load_report.unknown_users);
            }
            let outcome = train(&net, &casc, &cfg)?;
            let mut manifest = Manifest::new(&cfg, net.num_users, &outcome.store);
            manifest.notes.insert("epochs_run".into(), serde_json::json!(outcome.epochs_run));
            manifest.notes.insert("val_map10".into(), serde_json::json!(outcome.val_map10));
            if let Some(reason) = &outcome.aborted {
                manifest.notes.insert("aborted".into(), serde_json::json!(reason));
            }
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            save_checkpoint(&out, &outcome.store, &manifest)?;
            vocab.save(&out.join("vocab.tsv"))?;
            write_train_log(&out.join("train_log.tsv"), &outcome.log)?;
            if let Some(reason) = outcome.aborted {
                eprintln!("error: non-finite value in {reason}; last finite checkpoint saved");
                return Ok(ExitCode::from(4));
            }
            println!(
                "trained {} epochs, val MAP@10 {:.4}, checkpoint in {}",
                outcome.epochs_run,
                outcome.val_map10,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Predict { checkpoint, cascades, seed_pct, k, out } => {
            let (store, manifest) = load_checkpoint(&checkpoint)?;
            let vocab = cascade_vae::graph::Vocab::load(&checkpoint.join("vocab.tsv"))?;
            let (casc, _) = load_cascades(&cascades, &vocab)?;
            let results = rank_slices(&store, &manifest, &casc, seed_pct)?;
            write_predictions(&out, &results, &vocab, k)?;
            println!("wrote {} prediction lines to {}", results.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { checkpoint, cascades, seed_pct, k, graph, report } => {
            let (store, manifest) = load_checkpoint(&checkpoint)?;
            let vocab = cascade_vae::graph::Vocab::load(&checkpoint.join("vocab.tsv"))?;
            let (casc, _) = load_cascades(&cascades, &vocab)?;
            let n = manifest.num_users;

            let mut blocks = Vec::new();
            let mut all_results: Vec<RankResult> = Vec::new();
            for &pct in &seed_pct {
                let results = rank_slices(&store, &manifest, &casc, pct)?;
                blocks.push(SeedPctBlock {
                    seed_pct: pct,
                    episodes: results.len(),
                    rows: metric_rows(&results, &k),
                });
                all_results.extend(results);
            }

            let mut quartiles = Vec::new();
            let recall100 = target_recall_per_user(&all_results, 100);
            if recall100.len() >= 4 {
                let act = activity_levels(&casc, n);
                let act_stat: BTreeMap<usize, f64> =
                    (0..n).map(|u| (u, act[u] as f64)).collect();
                quartiles.push(quartile_report(&recall100, &act_stat, "activity_level")?);
                if let Some(graph_path) = &graph {
                    let (net, _) = load_edge_list(graph_path)?;
                    let mut rng = RngStream::new(manifest.seed);
                    let episodes =
                        cascade_vae::cascade::make_all_episodes(&casc, None, &mut rng);
                    let frac = seed_neighbor_fractions(&episodes, &net);
                    quartiles.push(quartile_report(
                        &recall100, &frac, "seed_neighbor_fraction",
                    )?);
                }
            }

            let eval = EvalReport { blocks, quartiles };
            let json = serde_json::to_string_pretty(&eval).expect("report serializes");
            std::fs::write(&report, json).map_err(|e| Error::io(&report, e))?;
            for b in &eval.blocks {
                for row in &b.rows {
                    println!(
                        "seed_pct {:.2} K {:>4}: MAP {:.4} Recall {:.4} ({} episodes)",
                        b.seed_pct, row.k, row.map.mean, row.recall.mean, row.map.episodes
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck { tensor, cfg } => {
            let cfg = cfg.load()?;
            let filter: Option<Vec<String>> = if tensor == "all" {
                None
            } else {
                Some(vec![tensor])
            };
            let report = gradcheck_default(&cfg, filter.as_deref())?;
            for (name, err) in &report.per_tensor {
                println!("{name}\t{err:.3e}");
            }
            println!(
                "max relative error {:.3e} (threshold {:.0e})",
                report.max_error(),
                report.threshold
            );
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Err(Error::Invalid("gradient check failed".into()))
            }
        }
    }
}

/// Slice each test cascade once at `seed_pct` and rank the inactive users.
fn rank_slices(
    store: &ParamStore,
    manifest: &Manifest,
    cascades: &[cascade_vae::cascade::Cascade],
    seed_pct: f64,
) -> Result<Vec<RankResult>, Error> {
    if !(0.0..1.0).contains(&seed_pct) || seed_pct <= 0.0 {
        return Err(Error::config(format!("seed_pct must lie in (0, 1), got {seed_pct}")));
    }
    let diff = manifest.config.diffusion_spec();
    let mut pe = PositionalTable::new(manifest.config.embed_dim, 16)?;
    let mut results = Vec::new();
    for c in cascades {
        if let Some(ep) = seed_slice(c, seed_pct) {
            results.push(rank_inactive(store, &diff, &ep, manifest.num_users, &mut pe)?);
        }
    }
    Ok(results)
}
