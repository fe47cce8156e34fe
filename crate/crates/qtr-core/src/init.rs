//! Parameter initialization.
//!
//! Projections, attention, feed-forward and embedding tables draw from a
//! truncated normal (std 0.02, cut at two standard deviations). LSTM
//! matrices use uniform fan-in scaling. Biases start at zero except the
//! LSTM forget gate, which starts at +1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::arch::{LayerSpec, ModelSpec};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const INIT_STD: f64 = 0.02;

pub struct Initializer {
    rng: ChaCha20Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    fn unit_normal(&mut self) -> f64 {
        // Box-Muller; u1 shifted away from zero
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn trunc_normal<S: Scalar>(&mut self, std: f64) -> S {
        loop {
            let z = self.unit_normal();
            if z.abs() <= 2.0 {
                return S::from_f64_c(z * std);
            }
        }
    }

    pub fn normal_tensor<S: Scalar>(&mut self, rows: usize, cols: usize) -> Tensor<S> {
        self.normal_tensor_std(rows, cols, INIT_STD)
    }

    pub fn normal_tensor_std<S: Scalar>(&mut self, rows: usize, cols: usize, std: f64) -> Tensor<S> {
        let data = (0..rows * cols).map(|_| self.trunc_normal(std)).collect();
        Tensor::new(rows, cols, data)
    }

    pub fn fan_in_uniform<S: Scalar>(&mut self, rows: usize, cols: usize) -> Tensor<S> {
        let bound = 1.0 / (rows as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| S::from_f64_c(self.rng.gen_range(-bound..bound)))
            .collect();
        Tensor::new(rows, cols, data)
    }
}

fn lstm_bias<S: Scalar>(d_h: usize) -> Tensor<S> {
    // gate packing [input | forget | candidate | output]
    let mut b = vec![S::zero(); 4 * d_h];
    for v in &mut b[d_h..2 * d_h] {
        *v = S::one();
    }
    Tensor::row_vector(b)
}

/// Build a freshly initialized parameter store for a spec.
pub fn init_params<S: Scalar>(spec: &ModelSpec, seed: u64) -> ParamStore<S> {
    let mut init = Initializer::new(seed);
    let mut p = ParamStore::new();
    let d_h = spec.d_h();

    // fan-in scaled: recovers the usual 0.02 at width 768 and keeps token
    // vectors separable at narrow desk-scale widths
    let table_std = 0.55 / (spec.embed_dim as f64).sqrt();
    p.insert(
        "embed.table",
        init.normal_tensor_std(spec.vocab_size, spec.embed_dim, table_std),
        !spec.embedding_trainable,
        false,
    );
    p.insert("embed.proj.w", init.normal_tensor(spec.embed_dim, d_h), false, true);
    p.insert("embed.proj.b", Tensor::zeros(1, d_h), false, false);
    p.insert("embed.pos", init.normal_tensor(spec.num_positions, d_h), false, false);
    p.insert("embed.seg", init.normal_tensor(spec.num_segments, d_h), false, false);

    let mut d_in = d_h;
    for (i, layer) in spec.layers.iter().enumerate() {
        match layer {
            LayerSpec::BertStudent { d_h, d_ff, .. } => {
                for proj in ["q", "k", "v", "o"] {
                    p.insert(
                        format!("layer{i}.attn.{proj}.w"),
                        init.normal_tensor(*d_h, *d_h),
                        false,
                        true,
                    );
                    p.insert(format!("layer{i}.attn.{proj}.b"), Tensor::zeros(1, *d_h), false, false);
                }
                p.insert(format!("layer{i}.attn.ln.g"), Tensor::filled(1, *d_h, S::one()), false, false);
                p.insert(format!("layer{i}.attn.ln.b"), Tensor::zeros(1, *d_h), false, false);
                p.insert(format!("layer{i}.ffn.w1"), init.normal_tensor(*d_h, *d_ff), false, true);
                p.insert(format!("layer{i}.ffn.b1"), Tensor::zeros(1, *d_ff), false, false);
                p.insert(format!("layer{i}.ffn.w2"), init.normal_tensor(*d_ff, *d_h), false, true);
                p.insert(format!("layer{i}.ffn.b2"), Tensor::zeros(1, *d_h), false, false);
                p.insert(format!("layer{i}.ffn.ln.g"), Tensor::filled(1, *d_h, S::one()), false, false);
                p.insert(format!("layer{i}.ffn.ln.b"), Tensor::zeros(1, *d_h), false, false);
                d_in = *d_h;
            }
            LayerSpec::BiLstm { d_h } => {
                for dir in ["fwd", "bwd"] {
                    p.insert(
                        format!("layer{i}.{dir}.w"),
                        init.fan_in_uniform(d_in, 4 * d_h),
                        false,
                        true,
                    );
                    p.insert(
                        format!("layer{i}.{dir}.u"),
                        init.fan_in_uniform(*d_h, 4 * d_h),
                        false,
                        true,
                    );
                    p.insert(format!("layer{i}.{dir}.b"), lstm_bias(*d_h), false, false);
                }
                d_in = 2 * d_h;
            }
        }
    }

    let d_pool = spec.pooled_dim();
    p.insert("head.fc1.w", init.normal_tensor(d_pool, d_h), false, true);
    p.insert("head.fc1.b", Tensor::zeros(1, d_h), false, false);
    p.insert("head.fc2.w", init.normal_tensor(d_h, 2), false, true);
    p.insert("head.fc2.b", Tensor::zeros(1, 2), false, false);
    p
}
