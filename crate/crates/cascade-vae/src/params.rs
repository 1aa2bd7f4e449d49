//! Parameter storage, the Adam optimizer, and the finite-difference gradient
//! oracle.
//!
//! All trainable tensors live in a [`ParamStore`] keyed by name, each with a
//! same-shaped gradient buffer and Adam moment state. The trainer owns the
//! store exclusively during a step; evaluation works on read-only snapshots.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
    step: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a tensor. Names are unique; inserting twice panics.
    pub fn insert(&mut self, name: &str, value: Tensor) {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter `{name}`"
        );
        let (r, c) = value.shape();
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            grad: Tensor::zeros(r, c),
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
            step: 0,
            value,
        });
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn idx(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"))
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.params[self.idx(name)].value
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        let i = self.idx(name);
        &mut self.params[i].value
    }

    pub fn grad(&self, name: &str) -> &Tensor {
        &self.params[self.idx(name)].grad
    }

    /// Parameter names in insertion order.
    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.iter_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn accumulate_grad(&mut self, name: &str, grad: &Tensor) {
        let i = self.idx(name);
        let p = &mut self.params[i];
        assert_eq!(p.value.shape(), grad.shape(), "grad shape for `{name}`");
        for (g, d) in p.grad.data.iter_mut().zip(&grad.data) {
            *g += d;
        }
    }

    /// Checksum of a set of tensors, used by the phase-freeze invariant
    /// checks during block coordinate training.
    pub fn checksum(&self, names: &[&str]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for name in names {
            for &x in &self.get(name).data {
                h ^= x.to_bits();
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        }
        h
    }
}

/// Adam hyperparameters. Defaults: lr 1e-3, betas (0.9, 0.999), eps 1e-8.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam descent step on the named parameters, using the gradients
/// currently in their buffers. Only the listed parameters move, which is what
/// keeps the frozen block untouched during each phase of block coordinate
/// training. Aborts without touching anything if any listed gradient is
/// non-finite.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig, names: &[String]) -> Result<()> {
    for name in names {
        let i = store.idx(name);
        if !store.params[i].grad.is_finite() {
            return Err(Error::NonFinite {
                tensor: name.clone(),
                context: "adam_step".to_string(),
            });
        }
    }
    for name in names {
        let i = store.idx(name);
        let p = &mut store.params[i];
        p.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(p.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(p.step as i32);
        for j in 0..p.value.data.len() {
            let g = p.grad.data[j];
            p.m.data[j] = cfg.beta1 * p.m.data[j] + (1.0 - cfg.beta1) * g;
            p.v.data[j] = cfg.beta2 * p.v.data[j] + (1.0 - cfg.beta2) * g * g;
            let m_hat = p.m.data[j] / bc1;
            let v_hat = p.v.data[j] / bc2;
            p.value.data[j] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Central finite differences of a scalar loss with respect to one named
/// tensor: `(f(x+h) - f(x-h)) / 2h` per coordinate. The loss function must be
/// deterministic (fix the RNG draw outside). This is the independent oracle
/// the analytic gradients are checked against.
pub fn finite_diff_grad(
    mut loss_fn: impl FnMut(&ParamStore) -> f64,
    store: &mut ParamStore,
    name: &str,
    h: f64,
) -> Tensor {
    let (rows, cols) = store.get(name).shape();
    let mut grad = Tensor::zeros(rows, cols);
    for j in 0..rows * cols {
        let orig = store.get(name).data[j];
        store.get_mut(name).data[j] = orig + h;
        let f_plus = loss_fn(store);
        store.get_mut(name).data[j] = orig - h;
        let f_minus = loss_fn(store);
        store.get_mut(name).data[j] = orig;
        grad.data[j] = (f_plus - f_minus) / (2.0 * h);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::from_vec(1, 3, vec![1.0, 2.0, 3.0]));
        let before = store.get("w").clone();
        adam_step(&mut store, &AdamConfig::default(), &["w".to_string()]).unwrap();
        assert_eq!(store.get("w").data, before.data);
    }

    #[test]
    fn first_adam_step_is_lr_sized() {
        // With g = 1 the first update is lr * g / (|g| + eps) up to bias
        // correction, i.e. almost exactly -lr.
        let mut store = ParamStore::new();
        store.insert("x", Tensor::scalar(0.0));
        store.accumulate_grad("x", &Tensor::scalar(1.0));
        let cfg = AdamConfig::default();
        adam_step(&mut store, &cfg, &["x".to_string()]).unwrap();
        let x = store.get("x").data[0];
        assert!((x + cfg.lr).abs() < 1e-6, "x = {x}");
    }

    #[test]
    fn identical_stores_update_identically() {
        let mut a = ParamStore::new();
        a.insert("w", Tensor::from_vec(2, 2, vec![0.1, -0.2, 0.3, 0.4]));
        a.accumulate_grad("w", &Tensor::from_vec(2, 2, vec![1.0, -1.0, 0.5, 2.0]));
        let mut b = a.clone();
        let cfg = AdamConfig::default();
        let names = ["w".to_string()];
        adam_step(&mut a, &cfg, &names).unwrap();
        adam_step(&mut b, &cfg, &names).unwrap();
        assert_eq!(a.get("w").data, b.get("w").data);
    }

    #[test]
    fn nonfinite_gradient_aborts_with_tensor_name() {
        let mut store = ParamStore::new();
        store.insert("bad", Tensor::scalar(1.0));
        store.accumulate_grad("bad", &Tensor::scalar(f64::NAN));
        let err = adam_step(&mut store, &AdamConfig::default(), &["bad".to_string()])
            .unwrap_err();
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn finite_diff_on_quadratic() {
        let mut store = ParamStore::new();
        store.insert("x", Tensor::scalar(3.0));
        let g = finite_diff_grad(|s| s.get("x").data[0].powi(2), &mut store, "x", 1e-5);
        assert!((g.data[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_of_constant_is_zero() {
        let mut store = ParamStore::new();
        store.insert("x", Tensor::scalar(1.5));
        let g = finite_diff_grad(|_| 42.0, &mut store, "x", 1e-5);
        assert_eq!(g.data[0], 0.0);
    }

    #[test]
    fn finite_diff_of_sigmoid_at_zero() {
        let mut store = ParamStore::new();
        store.insert("x", Tensor::scalar(0.0));
        let g = finite_diff_grad(
            |s| crate::tensor::sigmoid(s.get("x").data[0]),
            &mut store,
            "x",
            1e-5,
        );
        assert!((g.data[0] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn checksum_changes_with_values() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::from_vec(1, 2, vec![1.0, 2.0]));
        let c1 = store.checksum(&["w"]);
        store.get_mut("w").data[0] = 1.5;
        let c2 = store.checksum(&["w"]);
        assert_ne!(c1, c2);
    }
}
