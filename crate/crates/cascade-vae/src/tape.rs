//! Minimal reverse-mode tape.
//!
//! Every loss in this crate (autoencoder likelihoods, diffusion likelihood,
//! regularizers) is built as a small expression graph on a [`Tape`]. Forward
//! values are computed eagerly at construction; [`Tape::backward`] walks the
//! nodes in reverse and composes the per-operation analytic adjoints.
//! Gradients for named [`Tape::param`] leaves are then scattered into a
//! [`ParamStore`](crate::params::ParamStore).
//!
//! The op set is exactly what the model needs; there is no broadcasting
//! beyond row-vector addition and no general tensor rank support.

use std::rc::Rc;

use crate::error::Result;
use crate::params::ParamStore;
use crate::tensor::{
    log_sigmoid, matmul_nn, matmul_nt, matmul_tn, sigmoid, softmax_into, CsMatrix, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    /// Named trainable leaf; gradients are collected for these.
    Param(String),
    /// Constant leaf; gradient is discarded.
    Const,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// `a + b` with `b` a row vector broadcast over the rows of `a`.
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    MatMulNN(NodeId, NodeId),
    MatMulNT(NodeId, NodeId),
    /// Sparse-dense product `S b` with a constant sparse left factor.
    SpMM(Rc<CsMatrix>, NodeId),
    /// Row gather; backward scatter-adds into the source rows.
    Gather(NodeId, Rc<Vec<usize>>),
    Tanh(NodeId),
    Exp(NodeId),
    Clamp(NodeId, f64, f64),
    Transpose(NodeId),
    /// Row-wise max-shifted softmax.
    SoftmaxRow(NodeId),
    /// Sum of all entries, producing a scalar.
    Sum(NodeId),
    /// Elementwise product with a constant mask.
    MulConst(NodeId, Rc<Tensor>),
    LogSigmoid(NodeId),
    /// `log(1 - sigmoid(x))`.
    LogSigmoidNeg(NodeId),
    SliceCols(NodeId, usize, usize),
    ConcatCols(NodeId, NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
    grad: Option<Tensor>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            grad: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        let t = self.value(id);
        assert_eq!(t.shape(), (1, 1), "expected scalar node");
        t.data[0]
    }

    // ---- leaves -----------------------------------------------------------

    /// Register a trainable parameter by copying its current value from the
    /// store. Gradients accumulate on the tape and flow back via
    /// [`Tape::scatter_grads`].
    pub fn param(&mut self, store: &ParamStore, name: &str) -> NodeId {
        let value = store.get(name).clone();
        self.push(Op::Param(name.to_string()), value)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Const, value)
    }

    // ---- elementwise ------------------------------------------------------

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "add shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let v = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "sub shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x - y).collect();
        let v = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "mul shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect();
        let v = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::Mul(a, b), v)
    }

    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(tb.rows, 1, "add_row rhs must be a row vector");
        assert_eq!(ta.cols, tb.cols, "add_row width mismatch");
        let mut v = ta.clone();
        for r in 0..v.rows {
            for c in 0..v.cols {
                v.data[r * v.cols + c] += tb.data[c];
            }
        }
        self.push(Op::AddRow(a, b), v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x *= c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x += c);
        self.push(Op::AddScalar(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x = x.tanh());
        self.push(Op::Tanh(a), v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x = x.exp());
        self.push(Op::Exp(a), v)
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), v)
    }

    pub fn log_sigmoid(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x = log_sigmoid(*x));
        self.push(Op::LogSigmoid(a), v)
    }

    pub fn log_one_minus_sigmoid(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x = log_sigmoid(-*x));
        self.push(Op::LogSigmoidNeg(a), v)
    }

    pub fn mul_const(&mut self, a: NodeId, mask: Rc<Tensor>) -> NodeId {
        let ta = self.value(a);
        assert_eq!(ta.shape(), mask.shape(), "mul_const shape mismatch");
        let data = ta.data.iter().zip(&mask.data).map(|(x, m)| x * m).collect();
        let v = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::MulConst(a, mask), v)
    }

    // ---- linear algebra ---------------------------------------------------

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = matmul_nn(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMulNN(a, b), v))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = matmul_nt(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMulNT(a, b), v))
    }

    pub fn spmm(&mut self, s: Rc<CsMatrix>, b: NodeId) -> Result<NodeId> {
        let v = s.matmul_dense(self.value(b))?;
        Ok(self.push(Op::SpMM(s, b), v))
    }

    pub fn gather(&mut self, a: NodeId, rows: Rc<Vec<usize>>) -> NodeId {
        let ta = self.value(a);
        let mut v = Tensor::zeros(rows.len(), ta.cols);
        for (i, &r) in rows.iter().enumerate() {
            v.data[i * ta.cols..(i + 1) * ta.cols].copy_from_slice(ta.row(r));
        }
        self.push(Op::Gather(a, rows), v)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let ta = self.value(a);
        let mut v = Tensor::zeros(ta.rows, ta.cols);
        for r in 0..ta.rows {
            let (lo, hi) = (r * ta.cols, (r + 1) * ta.cols);
            softmax_into(&ta.data[lo..hi], &mut v.data[lo..hi]);
        }
        self.push(Op::SoftmaxRow(a), v)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let total: f64 = self.value(a).data.iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(total))
    }

    pub fn slice_cols(&mut self, a: NodeId, lo: usize, hi: usize) -> NodeId {
        let ta = self.value(a);
        assert!(lo < hi && hi <= ta.cols, "slice_cols out of range");
        let mut v = Tensor::zeros(ta.rows, hi - lo);
        for r in 0..ta.rows {
            v.data[r * (hi - lo)..(r + 1) * (hi - lo)].copy_from_slice(&ta.row(r)[lo..hi]);
        }
        self.push(Op::SliceCols(a, lo, hi), v)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.rows, tb.rows, "concat_cols row mismatch");
        let cols = ta.cols + tb.cols;
        let mut v = Tensor::zeros(ta.rows, cols);
        for r in 0..ta.rows {
            v.data[r * cols..r * cols + ta.cols].copy_from_slice(ta.row(r));
            v.data[r * cols + ta.cols..(r + 1) * cols].copy_from_slice(tb.row(r));
        }
        self.push(Op::ConcatCols(a, b), v)
    }

    // ---- convenience ------------------------------------------------------

    /// Sum of squared entries as a scalar node.
    pub fn sum_of_squares(&mut self, a: NodeId) -> NodeId {
        let sq = self.mul(a, a);
        self.sum(sq)
    }

    /// Mean over rows via a constant ones vector: `(1/m) 1^T X`.
    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let m = self.value(a).rows;
        let ones = self.constant(Tensor::from_vec(1, m, vec![1.0; m]));
        let s = self.matmul(ones, a)?;
        Ok(self.scale(s, 1.0 / m as f64))
    }

    // ---- backward ---------------------------------------------------------

    /// Reverse sweep seeding the scalar `loss` node with gradient 1.
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(
            self.value(loss).shape(),
            (1, 1),
            "backward root must be scalar"
        );
        for node in self.nodes.iter_mut() {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            let g = match self.nodes[i].grad.take() {
                Some(g) => g,
                None => continue,
            };
            // Reattach so callers can inspect grads afterwards.
            self.nodes[i].grad = Some(g.clone());
            // Split borrow: clone the small bits we need.
            match &self.nodes[i].op {
                Op::Param(_) | Op::Const => {}
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    self.accumulate(a, &g);
                    self.accumulate(b, &g);
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    self.accumulate(a, &g);
                    let mut ng = g.clone();
                    ng.data.iter_mut().for_each(|x| *x = -*x);
                    self.accumulate(b, &ng);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = elemwise(&g, self.value(b), |g, y| g * y);
                    let db = elemwise(&g, self.value(a), |g, x| g * x);
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::AddRow(a, b) => {
                    let (a, b) = (*a, *b);
                    self.accumulate(a, &g);
                    let mut db = Tensor::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            db.data[c] += g.data[r * g.cols + c];
                        }
                    }
                    self.accumulate(b, &db);
                }
                Op::Scale(a, c) => {
                    let (a, c) = (*a, *c);
                    let mut da = g.clone();
                    da.data.iter_mut().for_each(|x| *x *= c);
                    self.accumulate(a, &da);
                }
                Op::AddScalar(a) => {
                    let a = *a;
                    self.accumulate(a, &g);
                }
                Op::MatMulNN(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = matmul_nt(&g, self.value(b)).expect("backward matmul_nn/da");
                    let db = matmul_tn(self.value(a), &g).expect("backward matmul_nn/db");
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::MatMulNT(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = matmul_nn(&g, self.value(b)).expect("backward matmul_nt/da");
                    let db = matmul_tn(&g, self.value(a)).expect("backward matmul_nt/db");
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::SpMM(s, b) => {
                    let (s, b) = (Rc::clone(s), *b);
                    // dB = S^T g, computed by row scatter.
                    let mut db = Tensor::zeros(s.cols, g.cols);
                    for r in 0..s.rows {
                        let grow = &g.data[r * g.cols..(r + 1) * g.cols];
                        for (c, v) in s.row_entries(r) {
                            let drow = &mut db.data[c * g.cols..(c + 1) * g.cols];
                            for (d, gv) in drow.iter_mut().zip(grow) {
                                *d += v * gv;
                            }
                        }
                    }
                    self.accumulate(b, &db);
                }
                Op::Gather(a, rows) => {
                    let (a, rows) = (*a, Rc::clone(rows));
                    let ta_shape = self.value(a).shape();
                    let mut da = Tensor::zeros(ta_shape.0, ta_shape.1);
                    for (i, &r) in rows.iter().enumerate() {
                        let grow = &g.data[i * g.cols..(i + 1) * g.cols];
                        let drow = &mut da.data[r * g.cols..(r + 1) * g.cols];
                        for (d, gv) in drow.iter_mut().zip(grow) {
                            *d += gv;
                        }
                    }
                    self.accumulate(a, &da);
                }
                Op::Tanh(a) => {
                    let a = *a;
                    let y = &self.nodes[i].value;
                    let da = elemwise(&g, y, |g, y| g * (1.0 - y * y));
                    self.accumulate(a, &da);
                }
                Op::Exp(a) => {
                    let a = *a;
                    let y = &self.nodes[i].value;
                    let da = elemwise(&g, y, |g, y| g * y);
                    self.accumulate(a, &da);
                }
                Op::Clamp(a, lo, hi) => {
                    let (a, lo, hi) = (*a, *lo, *hi);
                    let x = self.value(a);
                    let da = elemwise(&g, x, |g, x| if x >= lo && x <= hi { g } else { 0.0 });
                    self.accumulate(a, &da);
                }
                Op::Transpose(a) => {
                    let a = *a;
                    let da = g.transpose();
                    self.accumulate(a, &da);
                }
                Op::SoftmaxRow(a) => {
                    let a = *a;
                    let y = &self.nodes[i].value;
                    let mut da = Tensor::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let (lo, hi) = (r * y.cols, (r + 1) * y.cols);
                        let yr = &y.data[lo..hi];
                        let gr = &g.data[lo..hi];
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for c in 0..y.cols {
                            da.data[lo + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    self.accumulate(a, &da);
                }
                Op::Sum(a) => {
                    let a = *a;
                    let shape = self.value(a).shape();
                    let mut da = Tensor::zeros(shape.0, shape.1);
                    da.fill(g.data[0]);
                    self.accumulate(a, &da);
                }
                Op::MulConst(a, mask) => {
                    let (a, mask) = (*a, Rc::clone(mask));
                    let da = elemwise(&g, &mask, |g, m| g * m);
                    self.accumulate(a, &da);
                }
                Op::LogSigmoid(a) => {
                    let a = *a;
                    let x = self.value(a);
                    let da = elemwise(&g, x, |g, x| g * sigmoid(-x));
                    self.accumulate(a, &da);
                }
                Op::LogSigmoidNeg(a) => {
                    let a = *a;
                    let x = self.value(a);
                    let da = elemwise(&g, x, |g, x| -g * sigmoid(x));
                    self.accumulate(a, &da);
                }
                Op::SliceCols(a, lo, _hi) => {
                    let (a, lo) = (*a, *lo);
                    let shape = self.value(a).shape();
                    let mut da = Tensor::zeros(shape.0, shape.1);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            da.data[r * shape.1 + lo + c] += g.data[r * g.cols + c];
                        }
                    }
                    self.accumulate(a, &da);
                }
                Op::ConcatCols(a, b) => {
                    let (a, b) = (*a, *b);
                    let ca = self.value(a).cols;
                    let cb = self.value(b).cols;
                    let rows = g.rows;
                    let mut da = Tensor::zeros(rows, ca);
                    let mut db = Tensor::zeros(rows, cb);
                    for r in 0..rows {
                        da.data[r * ca..(r + 1) * ca].copy_from_slice(&g.row(r)[..ca]);
                        db.data[r * cb..(r + 1) * cb].copy_from_slice(&g.row(r)[ca..]);
                    }
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
            }
        }
    }

    fn accumulate(&mut self, id: NodeId, g: &Tensor) {
        let node = &mut self.nodes[id.0];
        debug_assert_eq!(node.value.shape(), g.shape(), "gradient shape mismatch");
        match &mut node.grad {
            Some(existing) => {
                for (e, v) in existing.data.iter_mut().zip(&g.data) {
                    *e += v;
                }
            }
            None => node.grad = Some(g.clone()),
        }
    }

    /// Add the gradients of all `Param` leaves into the store's gradient
    /// buffers. Returns the names that received gradient.
    pub fn scatter_grads(&self, store: &mut ParamStore) -> Vec<String> {
        let mut touched = Vec::new();
        for node in &self.nodes {
            if let (Op::Param(name), Some(grad)) = (&node.op, &node.grad) {
                store.accumulate_grad(name, grad);
                touched.push(name.clone());
            }
        }
        touched
    }
}

fn elemwise(g: &Tensor, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert_eq!(g.shape(), other.shape());
    let data = g
        .data
        .iter()
        .zip(&other.data)
        .map(|(&a, &b)| f(a, b))
        .collect();
    Tensor::from_vec(g.rows, g.cols, data)
}
