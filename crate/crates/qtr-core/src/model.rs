//! The encoder/classifier zoo: frozen-table embeddings with a trainable
//! projection, post-norm self-attention layers, BiLSTM layers, the hybrid
//! stack, pooling and the two-logit head.
//!
//! Class index 1 means "relevant"; index 0 means "irrelevant". That
//! convention is fixed here and used everywhere else.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::arch::{LayerSpec, ModelSpec, Pooling};
use crate::error::{Error, Result};
use crate::init::init_params;
use crate::input::TokenSequence;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::vocab::Vocab;

#[derive(Debug, Clone)]
pub struct Model<S> {
    pub spec: ModelSpec,
    pub params: ParamStore<S>,
    pub vocab_fingerprint: String,
}

/// Everything a caller may want from one recorded forward pass.
pub struct ForwardTrace {
    pub logits: Var,
    pub pooled: Var,
    /// Attention probability matrices, one `Vec` of heads per
    /// self-attention layer.
    pub attention: Vec<Vec<Var>>,
    /// Tape leaf of every parameter, by name.
    pub leaves: BTreeMap<String, Var>,
}

impl<S: Scalar> Model<S> {
    /// Fresh model with randomly initialized parameters.
    pub fn init(spec: ModelSpec, vocab: &Vocab, seed: u64) -> Result<Self> {
        spec.validate()?;
        if spec.vocab_size != vocab.len() {
            return Err(Error::InvalidSpec(format!(
                "spec vocab size {} != vocabulary size {}",
                spec.vocab_size,
                vocab.len()
            )));
        }
        Ok(Self {
            params: init_params(&spec, seed),
            spec,
            vocab_fingerprint: vocab.fingerprint(),
        })
    }

    /// Fresh student whose frozen embedding table is copied from a trained
    /// teacher.
    pub fn init_student(spec: ModelSpec, vocab: &Vocab, seed: u64, teacher: &Self) -> Result<Self> {
        if spec.embed_dim != teacher.spec.embed_dim || spec.vocab_size != teacher.spec.vocab_size {
            return Err(Error::InvalidSpec(format!(
                "student embedding {}x{} incompatible with teacher {}x{}",
                spec.vocab_size, spec.embed_dim, teacher.spec.vocab_size, teacher.spec.embed_dim
            )));
        }
        if teacher.vocab_fingerprint != vocab.fingerprint() {
            return Err(Error::FingerprintMismatch {
                in_file: teacher.vocab_fingerprint.clone(),
                current: vocab.fingerprint(),
            });
        }
        let mut student = Self::init(spec, vocab, seed)?;
        student
            .params
            .set_tensor("embed.table", teacher.params.expect("embed.table").clone());
        Ok(student)
    }

    /// Record the full forward pass for one sequence on `tape`.
    pub fn forward_on_tape(&self, tape: &mut Tape<S>, seq: &TokenSequence) -> Result<ForwardTrace> {
        if seq.true_len > self.spec.max_seq_len {
            return Err(Error::InvalidSpec(format!(
                "sequence length {} exceeds max {}",
                seq.true_len, self.spec.max_seq_len
            )));
        }
        if seq.len() > self.spec.num_positions {
            return Err(Error::InvalidSpec(format!(
                "padded length {} exceeds positional table of {} rows",
                seq.len(),
                self.spec.num_positions
            )));
        }
        let mut leaves = BTreeMap::new();
        for (name, entry) in self.params.iter() {
            let var = if entry.frozen {
                tape.constant(entry.tensor.clone())
            } else {
                tape.leaf(entry.tensor.clone())
            };
            leaves.insert(name.clone(), var);
        }
        let get = |name: &str| -> Var {
            *leaves
                .get(name)
                .unwrap_or_else(|| panic!("missing parameter {name}"))
        };

        let mut x = self.embed_on_tape(tape, seq, &get)?;
        let true_len = seq.true_len;
        let mut attention = Vec::new();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            match layer {
                LayerSpec::BertStudent { d_h, heads, .. } => {
                    let (y, probs) =
                        bert_student_layer(tape, x, i, *d_h, *heads, true_len, &get)?;
                    x = y;
                    attention.push(probs);
                }
                LayerSpec::BiLstm { d_h } => {
                    x = bilstm_layer(tape, x, i, *d_h, true_len, &get)?;
                }
            }
        }

        let pooled = match self.spec.pooling {
            Pooling::Mean => tape.mean_rows(x, true_len)?,
            Pooling::Cls => tape.row(x, 0)?,
            Pooling::BilstmFinalConcat => {
                let d_h = self.spec.d_h();
                let last = tape.row(x, true_len - 1)?;
                let fwd_final = tape.slice_cols(last, 0, d_h)?;
                let first = tape.row(x, 0)?;
                let bwd_final = tape.slice_cols(first, d_h, 2 * d_h)?;
                tape.concat_cols(fwd_final, bwd_final)?
            }
        };

        let logits = classify_on_tape(tape, pooled, &get)?;
        Ok(ForwardTrace {
            logits,
            pooled,
            attention,
            leaves,
        })
    }

    fn embed_on_tape(
        &self,
        tape: &mut Tape<S>,
        seq: &TokenSequence,
        get: &dyn Fn(&str) -> Var,
    ) -> Result<Var> {
        let ids: Vec<usize> = seq.ids.iter().map(|&id| id as usize).collect();
        let rows = tape.lookup(get("embed.table"), &ids)?;
        let projected = tape.matmul(rows, get("embed.proj.w"))?;
        let projected = tape.add_row(projected, get("embed.proj.b"))?;
        let positions: Vec<usize> = (0..seq.len()).collect();
        let pos = tape.lookup(get("embed.pos"), &positions)?;
        let segs: Vec<usize> = seq.segments.iter().map(|&s| s as usize).collect();
        let seg = tape.lookup(get("embed.seg"), &segs)?;
        let sum = tape.add(projected, pos)?;
        tape.add(sum, seg)
    }

    /// Logits for one sequence; `[irrelevant, relevant]`.
    pub fn logits(&self, seq: &TokenSequence) -> Result<[S; 2]> {
        let mut tape = Tape::new();
        let trace = self.forward_on_tape(&mut tape, seq)?;
        let v = tape.value(trace.logits);
        Ok([v.data()[0], v.data()[1]])
    }

    /// Probability of the relevant class (index 1).
    pub fn prob_relevant(&self, seq: &TokenSequence) -> Result<S> {
        let [l0, l1] = self.logits(seq)?;
        // softmax on two logits
        let m = l0.max(l1);
        let e0 = (l0 - m).exp();
        let e1 = (l1 - m).exp();
        Ok(e1 / (e0 + e1))
    }

    /// Relevance probabilities for many sequences, evaluated in parallel
    /// with the output in input order.
    pub fn prob_relevant_batch(&self, seqs: &[TokenSequence]) -> Result<Vec<S>> {
        seqs.par_iter().map(|s| self.prob_relevant(s)).collect()
    }

    /// Embedding output (`len x d_h`) before any encoder layer.
    pub fn embed(&self, seq: &TokenSequence) -> Result<Tensor<S>> {
        let mut tape = Tape::new();
        let mut leaves = BTreeMap::new();
        for (name, entry) in self.params.iter() {
            leaves.insert(name.clone(), tape.constant(entry.tensor.clone()));
        }
        let get = |name: &str| -> Var { *leaves.get(name).unwrap() };
        let out = self.embed_on_tape(&mut tape, seq, &get)?;
        Ok(tape.value(out).clone())
    }

    /// Pooled encoder output (`1 x d_pool`).
    pub fn encode(&self, seq: &TokenSequence) -> Result<Tensor<S>> {
        let mut tape = Tape::new();
        let trace = self.forward_on_tape(&mut tape, seq)?;
        Ok(tape.value(trace.pooled).clone())
    }

    /// Head only: pooled vector to logits.
    pub fn classify(&self, pooled: &Tensor<S>) -> Result<[S; 2]> {
        let mut tape = Tape::new();
        let mut leaves = BTreeMap::new();
        for name in ["head.fc1.w", "head.fc1.b", "head.fc2.w", "head.fc2.b"] {
            leaves.insert(name.to_string(), tape.constant(self.params.expect(name).clone()));
        }
        let get = |name: &str| -> Var { *leaves.get(name).unwrap() };
        let x = tape.constant(pooled.clone());
        let logits = classify_on_tape(&mut tape, x, &get)?;
        let v = tape.value(logits);
        Ok([v.data()[0], v.data()[1]])
    }

    /// Attention probability matrices per self-attention layer and head.
    pub fn attention_probs(&self, seq: &TokenSequence) -> Result<Vec<Vec<Tensor<S>>>> {
        let mut tape = Tape::new();
        let trace = self.forward_on_tape(&mut tape, seq)?;
        Ok(trace
            .attention
            .iter()
            .map(|heads| heads.iter().map(|&v| tape.value(v).clone()).collect())
            .collect())
    }

    /// Cast every parameter, e.g. to benchmark precision.
    pub fn cast<T: Scalar>(&self) -> Model<T> {
        let mut params = ParamStore::new();
        for (name, e) in self.params.iter() {
            params.insert(name.clone(), e.tensor.cast::<T>(), e.frozen, e.decay);
        }
        Model {
            spec: self.spec.clone(),
            params,
            vocab_fingerprint: self.vocab_fingerprint.clone(),
        }
    }
}

/// Post-norm transformer encoder layer; returns the output and the per-head
/// attention probabilities. Padded positions get zero attention weight.
fn bert_student_layer<S: Scalar>(
    tape: &mut Tape<S>,
    x: Var,
    index: usize,
    d_h: usize,
    heads: usize,
    true_len: usize,
    get: &dyn Fn(&str) -> Var,
) -> Result<(Var, Vec<Var>)> {
    let name = |part: &str| format!("layer{index}.{part}");
    let proj = |tape: &mut Tape<S>, x: Var, part: &str| -> Result<Var> {
        let w = tape.matmul(x, get(&name(&format!("attn.{part}.w"))))?;
        tape.add_row(w, get(&name(&format!("attn.{part}.b"))))
    };
    let q = proj(tape, x, "q")?;
    let k = proj(tape, x, "k")?;
    let v = proj(tape, x, "v")?;

    let d_head = d_h / heads;
    let scale = S::one() / S::from_f64_c((d_head as f64).sqrt());
    let mut head_ctx = Vec::with_capacity(heads);
    let mut head_probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (from, to) = (h * d_head, (h + 1) * d_head);
        let qh = tape.slice_cols(q, from, to)?;
        let kh = tape.slice_cols(k, from, to)?;
        let vh = tape.slice_cols(v, from, to)?;
        let scores = tape.matmul_t(qh, kh)?;
        let scores = tape.scale(scores, scale);
        let probs = tape.softmax(scores, true_len)?;
        let ctx = tape.matmul(probs, vh)?;
        head_ctx.push(ctx);
        head_probs.push(probs);
    }
    let mut ctx = head_ctx[0];
    for h in &head_ctx[1..] {
        ctx = tape.concat_cols(ctx, *h)?;
    }
    let out = tape.matmul(ctx, get(&name("attn.o.w")))?;
    let out = tape.add_row(out, get(&name("attn.o.b")))?;
    let res = tape.add(x, out)?;
    let normed = tape.layer_norm(res, get(&name("attn.ln.g")), get(&name("attn.ln.b")))?;

    let ff = tape.matmul(normed, get(&name("ffn.w1")))?;
    let ff = tape.add_row(ff, get(&name("ffn.b1")))?;
    let ff = tape.gelu(ff);
    let ff = tape.matmul(ff, get(&name("ffn.w2")))?;
    let ff = tape.add_row(ff, get(&name("ffn.b2")))?;
    let res2 = tape.add(normed, ff)?;
    let out = tape.layer_norm(res2, get(&name("ffn.ln.g")), get(&name("ffn.ln.b")))?;
    Ok((out, head_probs))
}

/// Bidirectional LSTM over the true length; per-position outputs are the
/// concatenated directional hidden states, padded rows stay zero.
fn bilstm_layer<S: Scalar>(
    tape: &mut Tape<S>,
    x: Var,
    index: usize,
    d_h: usize,
    true_len: usize,
    get: &dyn Fn(&str) -> Var,
) -> Result<Var> {
    let padded_len = tape.value(x).rows();

    let run = |tape: &mut Tape<S>, dir: &str, reverse: bool| -> Result<Vec<Var>> {
        let w = get(&format!("layer{index}.{dir}.w"));
        let u = get(&format!("layer{index}.{dir}.u"));
        let b = get(&format!("layer{index}.{dir}.b"));
        let mut h = tape.constant(Tensor::zeros(1, d_h));
        let mut c = tape.constant(Tensor::zeros(1, d_h));
        let mut states = Vec::with_capacity(true_len);
        let order: Vec<usize> = if reverse {
            (0..true_len).rev().collect()
        } else {
            (0..true_len).collect()
        };
        for t in order {
            let x_t = tape.row(x, t)?;
            let zx = tape.matmul(x_t, w)?;
            let zh = tape.matmul(h, u)?;
            let z = tape.add(zx, zh)?;
            let z = tape.add_row(z, b)?;
            let i_g = tape.slice_cols(z, 0, d_h)?;
            let f_g = tape.slice_cols(z, d_h, 2 * d_h)?;
            let g_g = tape.slice_cols(z, 2 * d_h, 3 * d_h)?;
            let o_g = tape.slice_cols(z, 3 * d_h, 4 * d_h)?;
            let i_g = tape.sigmoid(i_g);
            let f_g = tape.sigmoid(f_g);
            let g_g = tape.tanh(g_g);
            let o_g = tape.sigmoid(o_g);
            let keep = tape.mul(f_g, c)?;
            let write = tape.mul(i_g, g_g)?;
            c = tape.add(keep, write)?;
            let c_act = tape.tanh(c);
            h = tape.mul(o_g, c_act)?;
            states.push(h);
        }
        if reverse {
            states.reverse(); // back to position order
        }
        Ok(states)
    };

    let fwd = run(tape, "fwd", false)?;
    let bwd = run(tape, "bwd", true)?;
    let mut rows = Vec::with_capacity(padded_len);
    for t in 0..true_len {
        rows.push(tape.concat_cols(fwd[t], bwd[t])?);
    }
    if padded_len > true_len {
        let zero_row = tape.constant(Tensor::zeros(1, 2 * d_h));
        rows.extend(std::iter::repeat(zero_row).take(padded_len - true_len));
    }
    tape.stack_rows(&rows)
}

/// ReLU-activated hidden layer, then projection to the two output logits.
fn classify_on_tape<S: Scalar>(
    tape: &mut Tape<S>,
    pooled: Var,
    get: &dyn Fn(&str) -> Var,
) -> Result<Var> {
    let h = tape.matmul(pooled, get("head.fc1.w"))?;
    let h = tape.add_row(h, get("head.fc1.b"))?;
    let h = tape.relu(h);
    let out = tape.matmul(h, get("head.fc2.w"))?;
    tape.add_row(out, get("head.fc2.b"))
}
