//! CPU inference latency measurement.
//!
//! Times the end-to-end forward pass (embedding lookup through logits) on a
//! fixed random input, single-threaded, after a warmup phase. Tokenization
//! is outside the timed region. Absolute numbers are hardware-dependent;
//! orderings across architectures are the meaningful output.

use std::hint::black_box;
use std::time::Instant;

use anyhow::{ensure, Result};

use qtr_core::input::TokenSequence;
use qtr_core::model::Model;
use qtr_core::scalar::Scalar;

use rand::{Rng, SeedableRng};

/// Summary statistics of one benchmark run, times in milliseconds.
#[derive(Debug, Clone)]
pub struct BenchResult {
    pub model_id: String,
    pub seq_len: usize,
    pub batch: usize,
    pub iters: usize,
    pub warmup: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    pub precision: &'static str,
}

impl BenchResult {
    pub fn tsv_header() -> &'static str {
        "model\tseq_len\tbatch\titers\twarmup\tprecision\tmean_ms\tmedian_ms\tp99_ms"
    }

    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            self.model_id,
            self.seq_len,
            self.batch,
            self.iters,
            self.warmup,
            self.precision,
            self.mean_ms,
            self.median_ms,
            self.p99_ms
        )
    }
}

/// A plausibly shaped input of exactly `seq_len` tokens: `[CLS]`, a query
/// span, `[SEP]`, a title span, `[SEP]`, ids drawn from the word range.
pub fn bench_input(seq_len: usize, vocab_size: usize, seed: u64) -> TokenSequence {
    assert!(seq_len >= 5, "need room for the three specials and two words");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let body = seq_len - 3;
    let q_len = (body / 3).max(1);
    let t_len = body - q_len;
    let mut ids = Vec::with_capacity(seq_len);
    let mut segments = Vec::with_capacity(seq_len);
    let word = |rng: &mut rand_chacha::ChaCha8Rng| rng.gen_range(5..vocab_size as u32);
    ids.push(2); // [CLS]
    segments.push(0);
    for _ in 0..q_len {
        ids.push(word(&mut rng));
        segments.push(0);
    }
    ids.push(3); // [SEP]
    segments.push(0);
    for _ in 0..t_len {
        ids.push(word(&mut rng));
        segments.push(1);
    }
    ids.push(3);
    segments.push(1);
    TokenSequence {
        true_len: ids.len(),
        ids,
        segments,
    }
}

/// Measure a loaded model. `precision` is taken from the scalar type.
pub fn bench_latency<S: Scalar>(
    model: &Model<S>,
    seq_len: usize,
    batch: usize,
    iters: usize,
    warmup: usize,
    seed: u64,
) -> Result<BenchResult> {
    ensure!(iters >= 100, "need at least 100 timed iterations, got {iters}");
    ensure!(batch >= 1, "batch must be at least 1");
    let seq = bench_input(seq_len, model.spec.vocab_size, seed);

    for _ in 0..warmup {
        black_box(model.logits(&seq)?);
    }
    let mut samples_ms = Vec::with_capacity(iters);
    for _ in 0..iters {
        let start = Instant::now();
        for _ in 0..batch {
            black_box(model.logits(&seq)?);
        }
        samples_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mean = samples_ms.iter().sum::<f64>() / iters as f64;
    let mut sorted = samples_ms;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let p99_idx = ((iters as f64 * 0.99).ceil() as usize).clamp(1, iters) - 1;
    let p99 = sorted[p99_idx];

    let precision = if std::mem::size_of::<S>() == 4 { "f32" } else { "f64" };
    Ok(BenchResult {
        model_id: model.spec.name.clone(),
        seq_len,
        batch,
        iters,
        warmup,
        mean_ms: mean,
        median_ms: median,
        p99_ms: p99,
        precision,
    })
}
