//! Position-encoded temporal embeddings.
//!
//! The influence exerted by a seed activation at step `k` is modeled as a
//! fixed sinusoidal position encoding plus a trainable per-user popularity
//! offset: `v_t = v_p[user] + PE(k)`. Positions count within the seed
//! sequence (1..|I|).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Sinusoidal encoding of step `k >= 1` into `dim` (even) entries:
/// pairs `(2d, 2d+1)` hold `(sin, cos)` of `k / 10000^(2d/dim)`.
pub fn positional_encoding(k: usize, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::config(format!(
            "positional encoding dimension must be even and positive, got {dim}"
        )));
    }
    if k == 0 {
        return Err(Error::Invalid("positional encoding step must be >= 1".into()));
    }
    let mut out = vec![0.0; dim];
    for d in 0..dim / 2 {
        let angle = k as f64 / 10000f64.powf(2.0 * d as f64 / dim as f64);
        out[2 * d] = angle.sin();
        out[2 * d + 1] = angle.cos();
    }
    Ok(out)
}

/// Precomputed table of `PE(k)` rows for `k = 1..=k_max`, extended on demand.
#[derive(Debug, Clone)]
pub struct PositionalTable {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl PositionalTable {
    pub fn new(dim: usize, k_max: usize) -> Result<Self> {
        let mut table = PositionalTable {
            dim,
            rows: Vec::new(),
        };
        table.extend_to(k_max)?;
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_max(&self) -> usize {
        self.rows.len()
    }

    fn extend_to(&mut self, k_max: usize) -> Result<()> {
        for k in self.rows.len() + 1..=k_max {
            self.rows.push(positional_encoding(k, self.dim)?);
        }
        Ok(())
    }

    /// Row for step `k`, extending the table if needed.
    pub fn row(&mut self, k: usize) -> Result<&[f64]> {
        if k == 0 {
            return Err(Error::Invalid("step must be >= 1".into()));
        }
        if k > self.rows.len() {
            self.extend_to(k)?;
        }
        Ok(&self.rows[k - 1])
    }

    /// The `PE` rows for steps `1..=count` stacked as a `count x dim` tensor.
    pub fn prefix_tensor(&mut self, count: usize) -> Result<Tensor> {
        self.extend_to(count)?;
        let mut t = Tensor::zeros(count, self.dim);
        for k in 0..count {
            t.data[k * self.dim..(k + 1) * self.dim].copy_from_slice(&self.rows[k]);
        }
        Ok(t)
    }
}

/// `v_t = v_p[user] + PE(k)` for one activation, reading the popularity row
/// from a dense `N x D` tensor.
pub fn temporal_variable(
    popularity: &Tensor,
    table: &mut PositionalTable,
    user: usize,
    k: usize,
) -> Result<Vec<f64>> {
    let pe = table.row(k)?;
    Ok(popularity
        .row(user)
        .iter()
        .zip(pe)
        .map(|(p, e)| p + e)
        .collect())
}
