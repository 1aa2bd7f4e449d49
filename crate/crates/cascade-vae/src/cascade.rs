//! Cascade ingestion, training-episode construction, and dataset splits.
//!
//! A cascade is an ordered sequence of distinct user activations. Training
//! episodes are made by slicing a cascade at every step `k = 2..K-1` into a
//! seed prefix `I` and a target set `C`. Test-time episodes instead reveal a
//! configured fraction of the cascade as seeds.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Vocab;
use crate::rng::RngStream;

#[derive(Debug, Clone)]
pub struct Cascade {
    pub id: String,
    /// `(user index, step)` with steps 1..K and distinct users.
    pub activations: Vec<(usize, usize)>,
}

impl Cascade {
    pub fn new(id: impl Into<String>, users: &[usize]) -> Self {
        Cascade {
            id: id.into(),
            activations: users
                .iter()
                .enumerate()
                .map(|(i, &u)| (u, i + 1))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.activations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }

    pub fn users(&self) -> Vec<usize> {
        self.activations.iter().map(|&(u, _)| u).collect()
    }
}

/// One (seed sequence, target set) pair.
#[derive(Debug, Clone)]
pub struct Episode {
    pub cascade_id: String,
    /// Seed activations `(user, step)` with steps 1..|I| in order.
    pub seeds: Vec<(usize, usize)>,
    /// Influenced users after the split; disjoint from the seeds.
    pub targets: BTreeSet<usize>,
}

impl Episode {
    pub fn seed_users(&self) -> Vec<usize> {
        self.seeds.iter().map(|&(u, _)| u).collect()
    }
}

/// Warnings accumulated while loading a cascade file.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub unknown_users: usize,
    pub duplicate_users: usize,
    pub skipped_short: usize,
}

/// Parse a cascade file: one cascade per line,
/// `cascade_id<TAB>u1[:t1] u2[:t2] ...`. Timestamps, when present, are used
/// only to sort the activations and then discarded. Unknown users are dropped
/// (counted), duplicates keep the first occurrence, and cascades shorter than
/// 2 after cleaning are skipped.
pub fn load_cascades(path: &Path, vocab: &Vocab) -> Result<(Vec<Cascade>, LoadReport)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut cascades = Vec::new();
    let mut report = LoadReport::default();
    let mut any_line = false;
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        any_line = true;
        let mut parts = trimmed.splitn(2, '\t');
        let id = parts.next().unwrap_or_default();
        let rest = parts.next().ok_or_else(|| Error::Parse {
            path: path.into(),
            line: lineno + 1,
            msg: "expected `cascade_id<TAB>users...`".into(),
        })?;

        // (user index, timestamp, file position)
        let mut entries: Vec<(usize, f64, usize)> = Vec::new();
        for (pos, token) in rest.split_whitespace().enumerate() {
            let (uid, ts) = match token.split_once(':') {
                Some((u, t)) => {
                    let ts: f64 = t.parse().map_err(|_| Error::Parse {
                        path: path.into(),
                        line: lineno + 1,
                        msg: format!("bad timestamp in `{token}`"),
                    })?;
                    (u, ts)
                }
                None => (token, pos as f64),
            };
            match vocab.index_of(uid) {
                Some(i) => entries.push((i, ts, pos)),
                None => report.unknown_users += 1,
            }
        }
        // Stable order: timestamp, then file position.
        entries.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.2.cmp(&b.2)));

        let mut seen = BTreeSet::new();
        let mut users = Vec::new();
        for (u, _, _) in entries {
            if seen.insert(u) {
                users.push(u);
            } else {
                report.duplicate_users += 1;
            }
        }
        if users.len() < 2 {
            report.skipped_short += 1;
            continue;
        }
        cascades.push(Cascade::new(id, &users));
    }
    if !any_line {
        return Err(Error::Invalid(format!("empty cascade file {path:?}")));
    }
    Ok((cascades, report))
}

pub fn write_cascades(path: &Path, cascades: &[Cascade], vocab: &Vocab) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    for c in cascades {
        let users: Vec<&str> = c.users().iter().map(|&u| vocab.id_of(u)).collect();
        writeln!(f, "{}\t{}", c.id, users.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// All training episodes for one cascade: one split per step `k = 2..K-1`,
/// giving exactly `K-2` episodes. Cascades shorter than 3 yield none.
pub fn make_episodes(c: &Cascade) -> Vec<Episode> {
    let k_max = c.len();
    if k_max < 3 {
        return Vec::new();
    }
    (2..k_max)
        .map(|k| Episode {
            cascade_id: c.id.clone(),
            seeds: c.activations[..k].to_vec(),
            targets: c.activations[k..].iter().map(|&(u, _)| u).collect(),
        })
        .collect()
}

/// Episodes for a whole collection, with an optional per-cascade cap applied
/// by uniform subsampling (long cascades otherwise dominate the episode set).
pub fn make_all_episodes(
    cascades: &[Cascade],
    max_per_cascade: Option<usize>,
    rng: &mut RngStream,
) -> Vec<Episode> {
    let mut out = Vec::new();
    for c in cascades {
        let mut eps = make_episodes(c);
        if let Some(cap) = max_per_cascade {
            if eps.len() > cap {
                let mut idx: Vec<usize> = (0..eps.len()).collect();
                rng.shuffle(&mut idx);
                let mut keep: Vec<usize> = idx.into_iter().take(cap).collect();
                keep.sort_unstable();
                eps = keep.into_iter().map(|i| eps[i].clone()).collect();
            }
        }
        out.extend(eps);
    }
    out
}

/// Deterministic whole-cascade split into (train, val, test).
pub fn split_dataset(
    cascades: &[Cascade],
    fractions: (f64, f64, f64),
    rng_seed: u64,
) -> Result<(Vec<Cascade>, Vec<Cascade>, Vec<Cascade>)> {
    let (ft, fv, fe) = fractions;
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split fractions must sum to 1, got {fractions:?}"
        )));
    }
    if cascades.len() < 3 {
        return Err(Error::Invalid(format!(
            "need at least 3 cascades to split, got {}",
            cascades.len()
        )));
    }
    let mut idx: Vec<usize> = (0..cascades.len()).collect();
    RngStream::new(rng_seed).shuffle(&mut idx);
    let n = cascades.len();
    let n_train = (ft * n as f64).floor() as usize;
    let n_val = (fv * n as f64).floor() as usize;
    let pick = |range: &[usize]| -> Vec<Cascade> {
        range.iter().map(|&i| cascades[i].clone()).collect()
    };
    Ok((
        pick(&idx[..n_train]),
        pick(&idx[n_train..n_train + n_val]),
        pick(&idx[n_train + n_val..]),
    ))
}

/// Test-time episode: reveal `max(1, floor(seed_pct * K))` users as seeds,
/// the rest as targets. Returns `None` when the target set would be empty
/// (the caller reports a skip count).
pub fn seed_slice(c: &Cascade, seed_pct: f64) -> Option<Episode> {
    if c.len() < 2 {
        return None;
    }
    let k = ((seed_pct * c.len() as f64).floor() as usize).max(1);
    if k >= c.len() {
        return None;
    }
    Some(Episode {
        cascade_id: c.id.clone(),
        seeds: c.activations[..k].to_vec(),
        targets: c.activations[k..].iter().map(|&(u, _)| u).collect(),
    })
}
