//! Social network representation and normalized adjacency views.
//!
//! Edges are ingested from `src<TAB>dst` text files, symmetrized, and
//! deduplicated. The symmetric normalization `L = D^{-1/2} A D^{-1/2}` (and
//! `A_hat = L + I`) feeds both autoencoder variants. Rows of isolated users
//! are all-zero in `L` so the matrices stay finite.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::CsMatrix;

/// Maps external (string) user ids to dense indices and back.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    to_index: BTreeMap<String, usize>,
    to_id: Vec<String>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.to_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_id.is_empty()
    }

    /// Index for `id`, assigning the next free index on first sight.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.to_index.get(id) {
            return i;
        }
        let i = self.to_id.len();
        self.to_index.insert(id.to_string(), i);
        self.to_id.push(id.to_string());
        i
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.to_index.get(id).copied()
    }

    pub fn id_of(&self, index: usize) -> &str {
        &self.to_id[index]
    }

    /// Persist as `id<TAB>index` lines.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        for (i, id) in self.to_id.iter().enumerate() {
            writeln!(f, "{id}\t{i}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries: Vec<(String, usize)> = Vec::new();
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let id = parts.next().unwrap_or_default().to_string();
            let idx: usize = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg: "expected `id<TAB>index`".into(),
                })?;
            entries.push((id, idx));
        }
        entries.sort_by_key(|&(_, i)| i);
        let mut vocab = Vocab::new();
        for (pos, (id, idx)) in entries.into_iter().enumerate() {
            if idx != pos {
                return Err(Error::Invalid(format!(
                    "vocab indices not dense: expected {pos}, got {idx}"
                )));
            }
            vocab.intern(&id);
        }
        Ok(vocab)
    }
}

/// Undirected, unweighted social graph over `num_users` dense indices.
#[derive(Debug, Clone)]
pub struct SocialNetwork {
    pub num_users: usize,
    /// Canonical undirected edges with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Symmetric binary adjacency, no self loops.
    pub adjacency: CsMatrix,
    pub degrees: Vec<usize>,
}

impl SocialNetwork {
    /// Build from index pairs: symmetrize, deduplicate, drop self loops.
    pub fn from_edges(num_users: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Invalid("empty edge list".into()));
        }
        let mut canon: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(a, b) in pairs {
            if a >= num_users || b >= num_users {
                return Err(Error::Invalid(format!(
                    "edge ({a},{b}) out of range for {num_users} users"
                )));
            }
            if a == b {
                continue; // self loop
            }
            canon.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(usize, usize)> = canon.into_iter().collect();
        let mut degrees = vec![0usize; num_users];
        let mut triples = Vec::with_capacity(edges.len() * 2);
        for &(i, j) in &edges {
            degrees[i] += 1;
            degrees[j] += 1;
            triples.push((i, j, 1.0));
            triples.push((j, i, 1.0));
        }
        let adjacency = CsMatrix::from_triples(num_users, num_users, triples);
        Ok(SocialNetwork {
            num_users,
            edges,
            adjacency,
            degrees,
        })
    }

    /// Directed edge count (each undirected edge counted twice).
    pub fn num_directed_edges(&self) -> usize {
        self.edges.len() * 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.row_entries(i).map(|(j, _)| j)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i, j) != 0.0
    }
}

/// Symmetric normalization of the adjacency and its self-loop-augmented
/// companion, the inputs to the two encoder variants.
#[derive(Debug, Clone)]
pub struct NormalizedView {
    /// `D^{-1/2} A D^{-1/2}`; all-zero rows for isolated users.
    pub laplacian: CsMatrix,
    /// `laplacian + I`, exactly.
    pub a_hat: CsMatrix,
}

pub fn normalized_laplacian(net: &SocialNetwork) -> NormalizedView {
    let n = net.num_users;
    let inv_sqrt: Vec<f64> = net
        .degrees
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut lap_triples = Vec::with_capacity(net.num_directed_edges());
    for r in 0..n {
        for (c, _) in net.adjacency.row_entries(r) {
            lap_triples.push((r, c, inv_sqrt[r] * inv_sqrt[c]));
        }
    }
    let laplacian = CsMatrix::from_triples(n, n, lap_triples.clone());
    for i in 0..n {
        lap_triples.push((i, i, 1.0));
    }
    let a_hat = CsMatrix::from_triples(n, n, lap_triples);
    NormalizedView { laplacian, a_hat }
}

impl NormalizedView {
    pub fn num_users(&self) -> usize {
        self.laplacian.rows
    }

    /// The i-th row of `L`, densified.
    pub fn neighborhood_row(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.laplacian.rows {
            return Err(Error::Invalid(format!(
                "user index {i} out of range for {} users",
                self.laplacian.rows
            )));
        }
        Ok(self.laplacian.dense_row(i))
    }
}

/// Read an edge-list file (`src<TAB>dst`, `#` comments) and build the network
/// together with the id mapping. Ids are interned in file order.
pub fn load_edge_list(path: &Path) -> Result<(SocialNetwork, Vocab)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vocab = Vocab::new();
    let mut pairs = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split('\t');
        let (src, dst) = match (parts.next(), parts.next()) {
            (Some(s), Some(d)) if !s.is_empty() && !d.is_empty() => (s, d),
            _ => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg: "expected `src<TAB>dst`".into(),
                })
            }
        };
        let a = vocab.intern(src);
        let b = vocab.intern(dst);
        pairs.push((a, b));
    }
    let net = SocialNetwork::from_edges(vocab.len(), &pairs)?;
    Ok((net, vocab))
}

/// Build from external-id pairs against an existing mapping. Unknown ids are
/// an error naming the offending pair.
pub fn build_network(edge_list: &[(String, String)], vocab: &Vocab) -> Result<SocialNetwork> {
    let mut pairs = Vec::with_capacity(edge_list.len());
    for (lineno, (src, dst)) in edge_list.iter().enumerate() {
        let a = vocab
            .index_of(src)
            .ok_or_else(|| Error::UnknownUser {
                path: "<edge list>".into(),
                line: lineno + 1,
                id: src.clone(),
            })?;
        let b = vocab
            .index_of(dst)
            .ok_or_else(|| Error::UnknownUser {
                path: "<edge list>".into(),
                line: lineno + 1,
                id: dst.clone(),
            })?;
        pairs.push((a, b));
    }
    SocialNetwork::from_edges(vocab.len(), &pairs)
}

pub fn write_edge_list(path: &Path, net: &SocialNetwork, vocab: &Vocab) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    for &(i, j) in &net.edges {
        writeln!(f, "{}\t{}", vocab.id_of(i), vocab.id_of(j)).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
