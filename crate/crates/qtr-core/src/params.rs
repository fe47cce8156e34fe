//! Named parameter storage for models.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct ParamEntry<S> {
    pub tensor: Tensor<S>,
    /// Frozen entries are never touched by the optimizer.
    pub frozen: bool,
    /// Whether decoupled weight decay applies (matrices yes, biases/gains/embeddings no).
    pub decay: bool,
}

/// All tensors of a model, addressable by stable names. Iteration order is
/// the lexicographic name order, which keeps checkpoints and gradient
/// reductions deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<S> {
    entries: BTreeMap<String, ParamEntry<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<S>, frozen: bool, decay: bool) {
        let name = name.into();
        let prev = self.entries.insert(
            name.clone(),
            ParamEntry {
                tensor,
                frozen,
                decay,
            },
        );
        assert!(prev.is_none(), "duplicate parameter name {name}");
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.entries.get(name).map(|e| &e.tensor)
    }

    pub fn expect(&self, name: &str) -> &Tensor<S> {
        &self
            .entries
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
            .tensor
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry<S>> {
        self.entries.get(name)
    }

    pub fn set_tensor(&mut self, name: &str, tensor: Tensor<S>) {
        let e = self
            .entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"));
        assert_eq!(e.tensor.shape(), tensor.shape(), "shape change for {name}");
        e.tensor = tensor;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ParamEntry<S>)> {
        self.entries.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trainable_value_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| !e.frozen)
            .map(|e| e.tensor.len())
            .sum()
    }

    pub fn frozen_value_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.frozen)
            .map(|e| e.tensor.len())
            .sum()
    }

    /// SHA-256 over the frozen entries (name, shape, little-endian payload),
    /// in name order. Training must leave this untouched.
    pub fn frozen_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, e) in &self.entries {
            if !e.frozen {
                continue;
            }
            hasher.update(name.as_bytes());
            hasher.update((e.tensor.rows() as u64).to_le_bytes());
            hasher.update((e.tensor.cols() as u64).to_le_bytes());
            for &v in e.tensor.data() {
                hasher.update(v.to_le_bytes_vec());
            }
        }
        hex_string(&hasher.finalize())
    }

    /// Clone with one value perturbed; used by the finite-difference oracle.
    pub fn with_perturbed(&self, name: &str, index: usize, delta: S) -> Self {
        let mut out = self.clone();
        let e = out
            .entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"));
        let mut data = e.tensor.data().to_vec();
        data[index] = data[index] + delta;
        e.tensor = Tensor::new(e.tensor.rows(), e.tensor.cols(), data);
        out
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write;
        let _ = write!(s, "{b:02x}");
    }
    s
}
