//! Dense row-major 2-D tensors and the arithmetic kernels shared by the
//! forward pass and the gradient tape.
//!
//! Tensors are immutable once built; cloning shares the underlying buffer.
//! Scalars are `[1, 1]` tensors and row vectors are `[1, n]`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Tensor<S> {
    rows: usize,
    cols: usize,
    data: Arc<Vec<S>>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(
            rows * cols,
            data.len(),
            "tensor data length {} does not match shape [{rows}, {cols}]",
            data.len()
        );
        Self {
            rows,
            cols,
            data: Arc::new(data),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![S::zero(); rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, v: S) -> Self {
        Self::new(rows, cols, vec![v; rows * cols])
    }

    pub fn scalar(v: S) -> Self {
        Self::new(1, 1, vec![v])
    }

    pub fn row_vector(data: Vec<S>) -> Self {
        Self::new(1, data.len(), data)
    }

    /// Identity matrix of size n.
    pub fn identity(n: usize) -> Self {
        let mut data = vec![S::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = S::one();
        }
        Self::new(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn row_slice(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single value of a `[1, 1]` tensor.
    pub fn item(&self) -> S {
        assert_eq!(self.shape(), [1, 1], "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self::new(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Cast the element type, e.g. a verification-mode tensor to benchmark mode.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor::new(
            self.rows,
            self.cols,
            self.data.iter().map(|v| T::from_f64_c(v.to_f64_c())).collect(),
        )
    }

    fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(())
    }

    fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Vec<S> {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect()
    }

    /// `self @ other`, standard matrix product.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![S::zero(); m * n];
        for i in 0..m {
            let a_row = self.row_slice(i);
            let c_row = &mut out[i * n..(i + 1) * n];
            for (kk, &aik) in a_row.iter().enumerate() {
                let b_row = &other.data[kk * n..(kk + 1) * n];
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv = *cv + aik * bv;
                }
            }
        }
        let _ = k;
        Ok(Self::new(m, n, out))
    }

    /// `self @ other.T`; both operands are read by rows.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let (m, n) = (self.rows, other.rows);
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a_row = self.row_slice(i);
            for j in 0..n {
                let b_row = other.row_slice(j);
                let dot = a_row
                    .iter()
                    .zip(b_row)
                    .fold(S::zero(), |acc, (&a, &b)| acc + a * b);
                out.push(dot);
            }
        }
        Ok(Self::new(m, n, out))
    }

    /// `self.T @ other`, accumulated by outer products over shared rows.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul_tn",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let (m, n) = (self.cols, other.cols);
        let mut out = vec![S::zero(); m * n];
        for kk in 0..self.rows {
            let a_row = self.row_slice(kk);
            let b_row = other.row_slice(kk);
            for (i, &aik) in a_row.iter().enumerate() {
                let c_row = &mut out[i * n..(i + 1) * n];
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv = *cv + aik * bv;
                }
            }
        }
        Ok(Self::new(m, n, out))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "add")?;
        Ok(Self::new(self.rows, self.cols, self.zip_map(other, |a, b| a + b)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "sub")?;
        Ok(Self::new(self.rows, self.cols, self.zip_map(other, |a, b| a - b)))
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "hadamard")?;
        Ok(Self::new(self.rows, self.cols, self.zip_map(other, |a, b| a * b)))
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|v| v * c)
    }

    /// Add a `[1, n]` row vector to every row of an `[m, n]` tensor.
    pub fn add_row(&self, row: &Self) -> Result<Self> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                lhs: self.shape(),
                rhs: row.shape(),
            });
        }
        let mut out = Vec::with_capacity(self.len());
        for r in 0..self.rows {
            for (a, b) in self.row_slice(r).iter().zip(row.data.iter()) {
                out.push(*a + *b);
            }
        }
        Ok(Self::new(self.rows, self.cols, out))
    }

    /// Row-wise softmax over the first `valid_cols` columns; the rest are 0.
    /// Computed with max-subtraction so large inputs do not overflow.
    pub fn softmax_rows(&self, valid_cols: usize) -> Result<Self> {
        if valid_cols == 0 || valid_cols > self.cols {
            return Err(Error::IndexOutOfRange {
                op: "softmax_rows",
                index: valid_cols,
                shape: self.shape(),
            });
        }
        let mut out = vec![S::zero(); self.len()];
        for r in 0..self.rows {
            let row = &self.row_slice(r)[..valid_cols];
            let max = row.iter().fold(S::neg_infinity(), |m, &v| m.max(v));
            let mut sum = S::zero();
            let out_row = &mut out[r * self.cols..r * self.cols + valid_cols];
            for (o, &v) in out_row.iter_mut().zip(row) {
                let e = (v - max).exp();
                *o = e;
                sum = sum + e;
            }
            for o in out_row.iter_mut() {
                *o = *o / sum;
            }
        }
        Ok(Self::new(self.rows, self.cols, out))
    }

    /// Per-row layer normalization with affine gain/shift.
    pub fn layer_norm(&self, gamma: &Self, beta: &Self, eps: S) -> Result<Self> {
        if gamma.shape() != [1, self.cols] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: self.shape(),
                rhs: gamma.shape(),
            });
        }
        gamma.same_shape(beta, "layer_norm")?;
        let n = S::from_f64_c(self.cols as f64);
        let mut out = Vec::with_capacity(self.len());
        for r in 0..self.rows {
            let row = self.row_slice(r);
            let mean = row.iter().fold(S::zero(), |a, &v| a + v) / n;
            let var = row
                .iter()
                .fold(S::zero(), |a, &v| a + (v - mean) * (v - mean))
                / n;
            let inv_std = S::one() / (var + eps).sqrt();
            for (c, &v) in row.iter().enumerate() {
                let xhat = (v - mean) * inv_std;
                out.push(gamma.data[c] * xhat + beta.data[c]);
            }
        }
        Ok(Self::new(self.rows, self.cols, out))
    }

    /// Gather rows of an embedding table.
    pub fn lookup(&self, ids: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(ids.len() * self.cols);
        for &id in ids {
            if id >= self.rows {
                return Err(Error::VocabMismatch {
                    id: id as u32,
                    vocab_size: self.rows,
                });
            }
            out.extend_from_slice(self.row_slice(id));
        }
        Ok(Self::new(ids.len(), self.cols, out))
    }

    pub fn concat_cols(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch {
                op: "concat_cols",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut out = Vec::with_capacity(self.len() + other.len());
        for r in 0..self.rows {
            out.extend_from_slice(self.row_slice(r));
            out.extend_from_slice(other.row_slice(r));
        }
        Ok(Self::new(self.rows, self.cols + other.cols, out))
    }

    pub fn stack_rows(parts: &[&Self]) -> Result<Self> {
        assert!(!parts.is_empty(), "stack_rows on empty slice");
        let cols = parts[0].cols;
        let mut out = Vec::with_capacity(parts.len() * cols);
        for p in parts {
            if p.rows != 1 || p.cols != cols {
                return Err(Error::ShapeMismatch {
                    op: "stack_rows",
                    lhs: [1, cols],
                    rhs: p.shape(),
                });
            }
            out.extend_from_slice(p.data());
        }
        Ok(Self::new(parts.len(), cols, out))
    }

    pub fn row(&self, r: usize) -> Result<Self> {
        if r >= self.rows {
            return Err(Error::IndexOutOfRange {
                op: "row",
                index: r,
                shape: self.shape(),
            });
        }
        Ok(Self::new(1, self.cols, self.row_slice(r).to_vec()))
    }

    pub fn slice_cols(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.cols {
            return Err(Error::IndexOutOfRange {
                op: "slice_cols",
                index: to,
                shape: self.shape(),
            });
        }
        let w = to - from;
        let mut out = Vec::with_capacity(self.rows * w);
        for r in 0..self.rows {
            out.extend_from_slice(&self.row_slice(r)[from..to]);
        }
        Ok(Self::new(self.rows, w, out))
    }

    /// Mean over the first `valid_rows` rows, producing a `[1, n]` tensor.
    pub fn mean_rows(&self, valid_rows: usize) -> Result<Self> {
        if valid_rows == 0 || valid_rows > self.rows {
            return Err(Error::IndexOutOfRange {
                op: "mean_rows",
                index: valid_rows,
                shape: self.shape(),
            });
        }
        let inv = S::one() / S::from_f64_c(valid_rows as f64);
        let mut out = vec![S::zero(); self.cols];
        for r in 0..valid_rows {
            for (o, &v) in out.iter_mut().zip(self.row_slice(r)) {
                *o = *o + v;
            }
        }
        for o in out.iter_mut() {
            *o = *o * inv;
        }
        Ok(Self::new(1, self.cols, out))
    }

    pub fn sum_all(&self) -> Self {
        Self::scalar(self.data.iter().fold(S::zero(), |a, &v| a + v))
    }

    /// log(sum(exp(row))) of a `[1, n]` tensor, max-subtracted for stability.
    pub fn logsumexp(&self) -> Result<Self> {
        if self.rows != 1 {
            return Err(Error::IndexOutOfRange {
                op: "logsumexp",
                index: self.rows,
                shape: self.shape(),
            });
        }
        let max = self.data.iter().fold(S::neg_infinity(), |m, &v| m.max(v));
        let sum = self
            .data
            .iter()
            .fold(S::zero(), |a, &v| a + (v - max).exp());
        Ok(Self::scalar(max + sum.ln()))
    }
}

impl<S: Scalar> PartialEq for Tensor<S> {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.data == other.data
    }
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// GELU with the usual tanh approximation.
pub fn gelu<S: Scalar>(x: S) -> S {
    let half = S::from_f64_c(0.5);
    let c = S::from_f64_c(0.797_884_560_802_865_4); // sqrt(2/pi)
    let a = S::from_f64_c(0.044_715);
    let inner = c * (x + a * x * x * x);
    half * x * (S::one() + inner.tanh())
}

/// Derivative of the tanh-approximated GELU.
pub fn gelu_prime<S: Scalar>(x: S) -> S {
    let half = S::from_f64_c(0.5);
    let c = S::from_f64_c(0.797_884_560_802_865_4);
    let a = S::from_f64_c(0.044_715);
    let three = S::from_f64_c(3.0);
    let inner = c * (x + a * x * x * x);
    let t = inner.tanh();
    let sech2 = S::one() - t * t;
    half * (S::one() + t) + half * x * sech2 * c * (S::one() + three * a * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_returns_operand() {
        let b = Tensor::<f64>::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let id = Tensor::<f64>::identity(3);
        assert_eq!(id.matmul(&b).unwrap(), b);
    }

    #[test]
    fn matmul_hand_checked_2x2() {
        let a = Tensor::<f64>::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Tensor::<f64>::new(2, 1, vec![0.0, 1.0]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_shape_mismatch_reports_both_shapes() {
        let a = Tensor::<f64>::zeros(2, 3);
        let b = Tensor::<f64>::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "message was: {err}");
    }

    #[test]
    fn matmul_transposed_variants_agree_with_plain() {
        let a = Tensor::<f64>::new(2, 3, vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]);
        let b = Tensor::<f64>::new(4, 3, (0..12).map(|v| v as f64 * 0.3 - 1.0).collect());
        // a @ b.T via nt kernel vs building the transpose by hand
        let bt = Tensor::<f64>::new(
            3,
            4,
            (0..12)
                .map(|i| b.get(i % 4, i / 4))
                .collect::<Vec<_>>(),
        );
        assert_eq!(a.matmul_nt(&b).unwrap(), a.matmul(&bt).unwrap());
        // a.T @ x via tn kernel
        let x = Tensor::<f64>::new(2, 2, vec![1.0, 0.0, -1.0, 2.0]);
        let at = Tensor::<f64>::new(3, 2, vec![1.0, 3.0, -2.0, 4.0, 0.5, -1.0]);
        assert_eq!(a.matmul_tn(&x).unwrap(), at.matmul(&x).unwrap());
    }

    #[test]
    fn softmax_symmetry_and_shift_stability() {
        let x = Tensor::<f64>::row_vector(vec![0.0, 0.0]);
        let y = x.softmax_rows(2).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);

        let big = Tensor::<f64>::row_vector(vec![1000.0, 1000.0]);
        let y = big.softmax_rows(2).unwrap();
        assert!(y.is_finite());
        assert_eq!(y.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_matches_high_precision_reference() {
        // exp-normalize of [1, 2, 3] computed with a 60-digit reference
        let expected = [
            0.090_030_573_170_380_46,
            0.244_728_471_054_797_64,
            0.665_240_955_774_821_9,
        ];
        let y = Tensor::<f64>::row_vector(vec![1.0, 2.0, 3.0])
            .softmax_rows(3)
            .unwrap();
        for (got, want) in y.data().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn softmax_masks_padded_columns_to_zero() {
        let x = Tensor::<f64>::new(2, 4, vec![1.0, 2.0, 3.0, 50.0, 0.0, 0.0, 0.0, 50.0]);
        let y = x.softmax_rows(3).unwrap();
        for r in 0..2 {
            assert_eq!(y.get(r, 3), 0.0);
            let sum: f64 = y.row_slice(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lookup_rejects_out_of_range_ids() {
        let table = Tensor::<f64>::zeros(4, 2);
        assert!(matches!(
            table.lookup(&[0, 4]),
            Err(Error::VocabMismatch { id: 4, .. })
        ));
    }

    #[test]
    fn logsumexp_is_shift_stable() {
        let x = Tensor::<f64>::row_vector(vec![1000.0, 1000.0]);
        let v = x.logsumexp().unwrap().item();
        assert!((v - (1000.0 + 2.0_f64.ln())).abs() < 1e-9);
    }
}
