//! Reverse-mode automatic differentiation on an operation tape.
//!
//! Every primitive records one node holding its output tensor and the
//! operand handles needed to push gradients back. `backward` walks the
//! node list once, in reverse order, accumulating operand gradients.
//! A tape is single-threaded and usually lives for one example.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{gelu, gelu_prime, sigmoid, Tensor};

/// Layer-norm variance floor.
pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    /// `a @ b.T`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    AddRow(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Gelu(Var),
    Softmax { x: Var, valid_cols: usize },
    LayerNorm { x: Var, gamma: Var, beta: Var },
    Lookup { table: Var, ids: Vec<usize> },
    ConcatCols(Var, Var),
    StackRows(Vec<Var>),
    Row(Var, usize),
    SliceCols { x: Var, from: usize, to: usize },
    MeanRows { x: Var, valid_rows: usize },
    SumAll(Var),
    LogSumExp(Var),
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    /// False when no differentiable leaf feeds this node; backward skips it.
    needs_grad: bool,
}

/// Gradients of a scalar output with respect to tape nodes.
pub struct Gradients<S> {
    by_node: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient for `v`, or a zero tensor of the given shape if `v` did not
    /// influence the output.
    pub fn get(&self, v: Var, shape: [usize; 2]) -> Tensor<S> {
        match &self.by_node[v.0] {
            Some(buf) => Tensor::new(shape[0], shape[1], buf.clone()),
            None => Tensor::zeros(shape[0], shape[1]),
        }
    }

    pub fn try_get(&self, v: Var) -> Option<&[S]> {
        self.by_node[v.0].as_deref()
    }

    /// Move the gradient buffer out, if any.
    pub fn take(&mut self, v: Var) -> Option<Vec<S>> {
        self.by_node[v.0].take()
    }
}

#[derive(Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        let needs_grad = match &op {
            Op::Leaf => true,
            Op::MatMul(a, b)
            | Op::MatMulT(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::ConcatCols(a, b) => self.needs(*a) || self.needs(*b),
            Op::Scale(a, _)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::Gelu(a)
            | Op::Row(a, _)
            | Op::SumAll(a)
            | Op::LogSumExp(a) => self.needs(*a),
            Op::Softmax { x, .. } | Op::SliceCols { x, .. } | Op::MeanRows { x, .. } => {
                self.needs(*x)
            }
            Op::LayerNorm { x, gamma, beta } => {
                self.needs(*x) || self.needs(*gamma) || self.needs(*beta)
            }
            Op::Lookup { table, .. } => self.needs(*table),
            Op::StackRows(parts) => parts.iter().any(|p| self.needs(*p)),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A leaf that never receives a gradient (frozen tables, zero padding).
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].needs_grad = false;
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// `a @ b.T`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        Ok(self.push(v, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        let v = self.value(a).scale(c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let v = self.value(a).add_row(self.value(row))?;
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > S::zero() { x } else { S::zero() });
        self.push(v, Op::Relu(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(gelu);
        self.push(v, Op::Gelu(a))
    }

    /// Row-wise softmax over the first `valid_cols` columns; padded columns
    /// get exactly zero weight.
    pub fn softmax(&mut self, x: Var, valid_cols: usize) -> Result<Var> {
        let v = self.value(x).softmax_rows(valid_cols)?;
        Ok(self.push(v, Op::Softmax { x, valid_cols }))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let eps = S::from_f64_c(LAYER_NORM_EPS);
        let v = self.value(x).layer_norm(self.value(gamma), self.value(beta), eps)?;
        Ok(self.push(v, Op::LayerNorm { x, gamma, beta }))
    }

    pub fn lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let v = self.value(table).lookup(ids)?;
        Ok(self.push(v, Op::Lookup { table, ids: ids.to_vec() }))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).concat_cols(self.value(b))?;
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor<S>> = parts.iter().map(|p| self.value(*p)).collect();
        let v = Tensor::stack_rows(&tensors)?;
        Ok(self.push(v, Op::StackRows(parts.to_vec())))
    }

    pub fn row(&mut self, a: Var, r: usize) -> Result<Var> {
        let v = self.value(a).row(r)?;
        Ok(self.push(v, Op::Row(a, r)))
    }

    pub fn slice_cols(&mut self, x: Var, from: usize, to: usize) -> Result<Var> {
        let v = self.value(x).slice_cols(from, to)?;
        Ok(self.push(v, Op::SliceCols { x, from, to }))
    }

    pub fn mean_rows(&mut self, x: Var, valid_rows: usize) -> Result<Var> {
        let v = self.value(x).mean_rows(valid_rows)?;
        Ok(self.push(v, Op::MeanRows { x, valid_rows }))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_all();
        self.push(v, Op::SumAll(a))
    }

    pub fn logsumexp(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).logsumexp()?;
        Ok(self.push(v, Op::LogSumExp(a)))
    }

    /// Reverse pass from a scalar node. Visits every node at most once, in
    /// strictly decreasing tape order; gradients accumulate in place.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        let out = self.value(loss);
        if out.shape() != [1, 1] {
            return Err(Error::IndexOutOfRange {
                op: "backward",
                index: loss.0,
                shape: out.shape(),
            });
        }
        let mut grads: Vec<Option<Vec<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![S::one()]);

        for i in (0..=loss.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.step_back(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { by_node: grads })
    }

    /// Zero-initialized gradient buffer for an operand, or `None` when the
    /// operand does not need a gradient.
    fn grad_buf<'a>(&self, grads: &'a mut [Option<Vec<S>>], v: Var) -> Option<&'a mut [S]> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        Some(
            grads[v.0]
                .get_or_insert_with(|| vec![S::zero(); self.nodes[v.0].value.len()])
                .as_mut_slice(),
        )
    }

    fn step_back(&self, i: usize, g: &[S], grads: &mut [Option<Vec<S>>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                // c = a@b: da += g@b.T, db += a.T@g
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if let Some(da) = self.grad_buf(grads, *a) {
                    acc_nt(g, m, n, bv.data(), k, da);
                }
                if let Some(db) = self.grad_buf(grads, *b) {
                    acc_tn(av.data(), m, k, g, n, db);
                }
            }
            Op::MatMulT(a, b) => {
                // c = a@b.T: da += g@b, db += g.T@a
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.rows());
                if let Some(da) = self.grad_buf(grads, *a) {
                    acc_nn(g, m, n, bv.data(), k, da);
                }
                if let Some(db) = self.grad_buf(grads, *b) {
                    acc_tn(g, m, n, av.data(), k, db);
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if let Some(d) = self.grad_buf(grads, *v) {
                        acc_scaled(d, g, S::one());
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(da) = self.grad_buf(grads, *a) {
                    acc_scaled(da, g, S::one());
                }
                if let Some(db) = self.grad_buf(grads, *b) {
                    acc_scaled(db, g, -S::one());
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(da) = self.grad_buf(grads, *a) {
                    acc_prod(da, g, bv.data());
                }
                if let Some(db) = self.grad_buf(grads, *b) {
                    acc_prod(db, g, av.data());
                }
            }
            Op::Scale(a, c) => {
                if let Some(da) = self.grad_buf(grads, *a) {
                    acc_scaled(da, g, *c);
                }
            }
            Op::AddRow(a, row) => {
                if let Some(da) = self.grad_buf(grads, *a) {
                    acc_scaled(da, g, S::one());
                }
                if let Some(db) = self.grad_buf(grads, *row) {
                    // bias gradient: column sums
                    let cols = db.len();
                    for chunk in g.chunks_exact(cols) {
                        for (d, &v) in db.iter_mut().zip(chunk) {
                            *d = *d + v;
                        }
                    }
                }
            }
            Op::Tanh(a) => {
                let y = self.nodes[i].value.data();
                if let Some(da) = self.grad_buf(grads, *a) {
                    for ((d, &gv), &yv) in da.iter_mut().zip(g).zip(y) {
                        *d = *d + gv * (S::one() - yv * yv);
                    }
                }
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[i].value.data();
                if let Some(da) = self.grad_buf(grads, *a) {
                    for ((d, &gv), &yv) in da.iter_mut().zip(g).zip(y) {
                        *d = *d + gv * yv * (S::one() - yv);
                    }
                }
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                if let Some(da) = self.grad_buf(grads, *a) {
                    for ((d, &gv), &xv) in da.iter_mut().zip(g).zip(x) {
                        if xv > S::zero() {
                            *d = *d + gv;
                        }
                    }
                }
            }
            Op::Gelu(a) => {
                let x = self.value(*a).data();
                if let Some(da) = self.grad_buf(grads, *a) {
                    for ((d, &gv), &xv) in da.iter_mut().zip(g).zip(x) {
                        *d = *d + gv * gelu_prime(xv);
                    }
                }
            }
            Op::Softmax { x, valid_cols } => {
                // dx_j += y_j * (g_j - sum_k g_k y_k) per row; masked columns
                // have y = 0 and receive nothing.
                let y = &self.nodes[i].value;
                let (rows, cols) = (y.rows(), y.cols());
                if let Some(dx) = self.grad_buf(grads, *x) {
                    for r in 0..rows {
                        let yr = &y.row_slice(r)[..*valid_cols];
                        let gr = &g[r * cols..r * cols + valid_cols];
                        let dot = yr
                            .iter()
                            .zip(gr)
                            .fold(S::zero(), |a2, (&yv, &gv)| a2 + yv * gv);
                        let out = &mut dx[r * cols..r * cols + valid_cols];
                        for ((o, &yv), &gv) in out.iter_mut().zip(yr).zip(gr) {
                            *o = *o + yv * (gv - dot);
                        }
                    }
                }
            }
            Op::LayerNorm { x, gamma, beta } => {
                let xv = self.value(*x);
                let gv = self.value(*gamma);
                let eps = S::from_f64_c(LAYER_NORM_EPS);
                let (rows, cols) = (xv.rows(), xv.cols());
                let n = S::from_f64_c(cols as f64);
                let mut xhat = vec![S::zero(); cols];
                for r in 0..rows {
                    let row = xv.row_slice(r);
                    let gr = &g[r * cols..(r + 1) * cols];
                    let mean = row.iter().fold(S::zero(), |a2, &v| a2 + v) / n;
                    let var = row
                        .iter()
                        .fold(S::zero(), |a2, &v| a2 + (v - mean) * (v - mean))
                        / n;
                    let inv_std = S::one() / (var + eps).sqrt();
                    for (h, &v) in xhat.iter_mut().zip(row) {
                        *h = (v - mean) * inv_std;
                    }
                    let mut mean_gy = S::zero();
                    let mut mean_gy_xhat = S::zero();
                    for ((&gi, &ga), &h) in gr.iter().zip(gv.data()).zip(&xhat) {
                        let gy = gi * ga;
                        mean_gy = mean_gy + gy;
                        mean_gy_xhat = mean_gy_xhat + gy * h;
                    }
                    mean_gy = mean_gy / n;
                    mean_gy_xhat = mean_gy_xhat / n;
                    if let Some(dx) = self.grad_buf(grads, *x) {
                        let out = &mut dx[r * cols..(r + 1) * cols];
                        for ((o, (&gi, &ga)), &h) in
                            out.iter_mut().zip(gr.iter().zip(gv.data())).zip(&xhat)
                        {
                            *o = *o + (gi * ga - mean_gy - h * mean_gy_xhat) * inv_std;
                        }
                    }
                    if let Some(dgamma) = self.grad_buf(grads, *gamma) {
                        for ((d, &gi), &h) in dgamma.iter_mut().zip(gr).zip(&xhat) {
                            *d = *d + gi * h;
                        }
                    }
                    if let Some(dbeta) = self.grad_buf(grads, *beta) {
                        for (d, &gi) in dbeta.iter_mut().zip(gr) {
                            *d = *d + gi;
                        }
                    }
                }
            }
            Op::Lookup { table, ids } => {
                let cols = self.value(*table).cols();
                if let Some(dt) = self.grad_buf(grads, *table) {
                    for (pos, &id) in ids.iter().enumerate() {
                        let src = &g[pos * cols..(pos + 1) * cols];
                        let dst = &mut dt[id * cols..(id + 1) * cols];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let rows = self.value(*a).rows();
                if let Some(da) = self.grad_buf(grads, *a) {
                    for r in 0..rows {
                        let src = &g[r * (ca + cb)..r * (ca + cb) + ca];
                        let dst = &mut da[r * ca..(r + 1) * ca];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                }
                if let Some(db) = self.grad_buf(grads, *b) {
                    for r in 0..rows {
                        let src = &g[r * (ca + cb) + ca..(r + 1) * (ca + cb)];
                        let dst = &mut db[r * cb..(r + 1) * cb];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                }
            }
            Op::StackRows(parts) => {
                let cols = self.nodes[i].value.cols();
                for (r, p) in parts.iter().enumerate() {
                    if let Some(dp) = self.grad_buf(grads, *p) {
                        acc_scaled(dp, &g[r * cols..(r + 1) * cols], S::one());
                    }
                }
            }
            Op::Row(a, r) => {
                let cols = self.value(*a).cols();
                if let Some(da) = self.grad_buf(grads, *a) {
                    acc_scaled(&mut da[r * cols..(r + 1) * cols], g, S::one());
                }
            }
            Op::SliceCols { x, from, to } => {
                let src_cols = self.value(*x).cols();
                let rows = self.value(*x).rows();
                let w = to - from;
                if let Some(dx) = self.grad_buf(grads, *x) {
                    for r in 0..rows {
                        let dst = &mut dx[r * src_cols + from..r * src_cols + to];
                        acc_scaled(dst, &g[r * w..(r + 1) * w], S::one());
                    }
                }
            }
            Op::MeanRows { x, valid_rows } => {
                let cols = self.value(*x).cols();
                let inv = S::one() / S::from_f64_c(*valid_rows as f64);
                if let Some(dx) = self.grad_buf(grads, *x) {
                    for r in 0..*valid_rows {
                        let dst = &mut dx[r * cols..(r + 1) * cols];
                        acc_scaled(dst, g, inv);
                    }
                }
            }
            Op::SumAll(a) => {
                let gi = g[0];
                if let Some(da) = self.grad_buf(grads, *a) {
                    for d in da.iter_mut() {
                        *d = *d + gi;
                    }
                }
            }
            Op::LogSumExp(a) => {
                let x = self.value(*a);
                let gi = g[0];
                if let Some(da) = self.grad_buf(grads, *a) {
                    let soft = x.softmax_rows(x.cols()).expect("finite logsumexp input");
                    for (d, &s) in da.iter_mut().zip(soft.data()) {
                        *d = *d + s * gi;
                    }
                }
            }
        }
    }
}

/// `out += factor * src`, elementwise.
fn acc_scaled<S: Scalar>(out: &mut [S], src: &[S], factor: S) {
    for (o, &s) in out.iter_mut().zip(src) {
        *o = *o + factor * s;
    }
}

/// `out += g (elementwise*) other`.
fn acc_prod<S: Scalar>(out: &mut [S], g: &[S], other: &[S]) {
    for ((o, &gv), &ov) in out.iter_mut().zip(g).zip(other) {
        *o = *o + gv * ov;
    }
}

/// `out[m x k] += a[m x n] @ b[k x n].T` (dot products of rows).
fn acc_nt<S: Scalar>(a: &[S], m: usize, n: usize, b: &[S], k: usize, out: &mut [S]) {
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        let out_row = &mut out[i * k..(i + 1) * k];
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[j * n..(j + 1) * n];
            let dot = a_row
                .iter()
                .zip(b_row)
                .fold(S::zero(), |acc2, (&x, &y)| acc2 + x * y);
            *o = *o + dot;
        }
    }
}

/// `out[k x n] += a[m x k].T @ b[m x n]` (outer products over shared rows).
fn acc_tn<S: Scalar>(a: &[S], m: usize, k: usize, b: &[S], n: usize, out: &mut [S]) {
    for r in 0..m {
        let a_row = &a[r * k..(r + 1) * k];
        let b_row = &b[r * n..(r + 1) * n];
        for (i, &av) in a_row.iter().enumerate() {
            let out_row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `out[m x k] += a[m x n] @ b[n x k]`.
fn acc_nn<S: Scalar>(a: &[S], m: usize, n: usize, b: &[S], k: usize, out: &mut [S]) {
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        let out_row = &mut out[i * k..(i + 1) * k];
        for (j, &av) in a_row.iter().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o = *o + av * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t64(rows: usize, cols: usize, data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(rows, cols, data)
    }

    #[test]
    fn chain_of_scales_multiplies_gradients() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(t64(1, 1, vec![3.0]));
        let y = tape.scale(x, 2.0);
        let z = tape.scale(y, -5.0);
        let g = tape.backward(z).unwrap();
        assert_eq!(g.get(x, [1, 1]).item(), -10.0);
    }

    #[test]
    fn matmul_backward_matches_hand_derivation() {
        // f = sum(a @ b), a: 1x2, b: 2x1 -> df/da = b.T, df/db = a.T
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(t64(1, 2, vec![2.0, -3.0]));
        let b = tape.leaf(t64(2, 1, vec![4.0, 5.0]));
        let c = tape.matmul(a, b).unwrap();
        let loss = tape.sum_all(c);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(a, [1, 2]).data(), &[4.0, 5.0]);
        assert_eq!(g.get(b, [2, 1]).data(), &[2.0, -3.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        // f = sum(x + x) -> df/dx = 2
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(t64(1, 3, vec![1.0, 2.0, 3.0]));
        let y = tape.add(x, x).unwrap();
        let loss = tape.sum_all(y);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x, [1, 3]).data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn backward_requires_scalar_output() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(t64(1, 3, vec![1.0, 2.0, 3.0]));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let table = tape.constant(t64(3, 2, vec![1.0; 6]));
        let x = tape.leaf(t64(1, 2, vec![2.0, 3.0]));
        let rows = tape.lookup(table, &[0, 2]).unwrap();
        let pooled = tape.mean_rows(rows, 2).unwrap();
        let prod = tape.mul(pooled, x).unwrap();
        let loss = tape.sum_all(prod);
        let g = tape.backward(loss).unwrap();
        assert!(g.try_get(table).is_none());
        assert_eq!(g.get(x, [1, 2]).data(), &[1.0, 1.0]);
    }

    #[test]
    fn unused_nodes_get_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(t64(1, 1, vec![1.0]));
        let orphan = tape.leaf(t64(1, 1, vec![9.0]));
        let loss = tape.scale(x, 2.0);
        let g = tape.backward(loss).unwrap();
        assert!(g.try_get(orphan).is_none());
        assert_eq!(g.get(orphan, [1, 1]).item(), 0.0);
    }
}
