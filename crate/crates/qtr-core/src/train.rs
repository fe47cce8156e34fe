//! The training protocol: per-epoch shuffling, mini-batch AdamW updates,
//! dev-set model selection with early stopping, the learning-rate sweep
//! and the end-to-end distillation driver.
//!
//! Determinism: shuffling and initialization are seeded, per-example
//! gradients are accumulated over a fixed number of index chunks
//! (independent of the machine's thread count) and reduced in chunk order,
//! so identical (seed, config, data) reproduce identical checkpoints in
//! verification mode. Dropout is never applied.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::input::{assemble_input, TokenSequence};
use crate::labeling::label_with_teacher;
use crate::loss::{loss_on_tape, LossConfig, LossMode};
use crate::metrics::{average_precision, corpus_cross_entropy, roc_auc, ScoredSet};
use crate::model::Model;
use crate::optim::{adamw_step, AdamHyper, AdamState};
use crate::scalar::Scalar;
use crate::tape::Tape;
use crate::tensor::Tensor;
use crate::vocab::Vocab;

/// Gradient reduction fans out over this many index chunks regardless of
/// the host's core count.
const GRAD_CHUNKS: usize = 8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_mode: LossMode,
    pub loss: LossConfig,
    /// Candidate learning rates for the sweep.
    pub learning_rates: Vec<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without a dev ROC AUC
    /// improvement.
    pub patience: usize,
    pub adam: AdamHyper,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_mode: LossMode::HardCe,
            loss: LossConfig::default(),
            learning_rates: vec![1e-3, 0.5e-4, 1e-4],
            batch_size: 256,
            max_epochs: 100,
            patience: 30,
            adam: AdamHyper::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidTrainConfig("batch size must be >= 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidTrainConfig("max epochs must be >= 1".into()));
        }
        if self.patience == 0 || self.patience > self.max_epochs {
            return Err(Error::InvalidTrainConfig(format!(
                "patience must be in 1..=max_epochs, got {} vs {}",
                self.patience, self.max_epochs
            )));
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|&lr| lr <= 0.0) {
            return Err(Error::InvalidTrainConfig(
                "need at least one positive learning rate".into(),
            ));
        }
        Ok(())
    }
}

/// A tokenized example ready for the forward pass.
#[derive(Debug, Clone)]
pub struct PreparedExample<S> {
    pub seq: TokenSequence,
    pub label: Option<u8>,
    pub teacher_logits: Option<[S; 2]>,
}

/// Tokenize and assemble a whole example list; fails on degenerate rows.
pub fn prepare<S: Scalar>(examples: &[Example], vocab: &Vocab) -> Result<Vec<PreparedExample<S>>> {
    examples
        .par_iter()
        .map(|e| {
            let seq = assemble_input(&e.query, &e.title, vocab)?;
            Ok(PreparedExample {
                seq,
                label: e.label,
                teacher_logits: e
                    .teacher_logits
                    .map(|[a, b]| [S::from_f64_c(a), S::from_f64_c(b)]),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub roc_auc: f64,
    pub avg_prec: f64,
    pub ce: f64,
}

/// Score a labeled set with the model and compute all three metrics.
pub fn evaluate<S: Scalar>(model: &Model<S>, data: &[PreparedExample<S>]) -> Result<EvalMetrics> {
    if data.is_empty() {
        return Err(Error::InvalidTrainConfig("evaluation set is empty".into()));
    }
    let probs: Vec<f64> = data
        .par_iter()
        .map(|e| model.prob_relevant(&e.seq).map(|p| p.to_f64_c()))
        .collect::<Result<_>>()?;
    let labels: Vec<bool> = data
        .iter()
        .map(|e| {
            e.label
                .map(|l| l == 1)
                .ok_or_else(|| Error::InvalidTrainConfig("evaluation example lacks a label".into()))
        })
        .collect::<Result<_>>()?;
    let set = ScoredSet::new(probs.clone(), labels.clone())?;
    Ok(EvalMetrics {
        roc_auc: roc_auc(&set)?,
        avg_prec: average_precision(&set)?,
        ce: corpus_cross_entropy(&probs, &labels)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingReason {
    Patience,
    MaxEpochs,
}

impl fmt::Display for StoppingReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Patience => f.write_str("patience"),
            Self::MaxEpochs => f.write_str("max_epochs"),
        }
    }
}

/// Tracks the best dev score and the epochs elapsed since it improved.
#[derive(Debug)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Record an epoch score; returns (improved, should_stop).
    pub fn observe(&mut self, epoch: usize, value: f64) -> (bool, bool) {
        let improved = match self.best {
            None => true,
            Some(best) => value > best,
        };
        if improved {
            self.best = Some(value);
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        (improved, self.stale >= self.patience)
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev: EvalMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub lr: f64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopping: StoppingReason,
}

impl TrainReport {
    pub fn best_dev_auc(&self) -> f64 {
        self.epochs[self.best_epoch - 1].dev.roc_auc
    }

    /// One `#`-prefixed metadata block, a header row, then one record per
    /// epoch, tab separated.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# lr\t{}\n", self.lr));
        s.push_str(&format!("# best_epoch\t{}\n", self.best_epoch));
        s.push_str(&format!("# stopping_reason\t{}\n", self.stopping));
        s.push_str("epoch\ttrain_loss\tdev_roc_auc\tdev_avg_prec\tdev_ce\n");
        for r in &self.epochs {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.epoch, r.train_loss, r.dev.roc_auc, r.dev.avg_prec, r.dev.ce
            ));
        }
        s
    }
}

pub struct TrainOutcome<S> {
    /// The parameters of the best dev-AUC epoch.
    pub model: Model<S>,
    pub report: TrainReport,
}

fn example_grads<S: Scalar>(
    model: &Model<S>,
    ex: &PreparedExample<S>,
    mode: LossMode,
    loss_cfg: &LossConfig,
) -> Result<(S, Vec<(String, Vec<S>)>)> {
    let mut tape = Tape::new();
    let trace = model.forward_on_tape(&mut tape, &ex.seq)?;
    let loss = loss_on_tape(&mut tape, trace.logits, mode, ex.label, ex.teacher_logits, loss_cfg)?;
    let loss_value = tape.value(loss).item();
    let mut grads = tape.backward(loss)?;
    let mut out = Vec::new();
    for (name, leaf) in &trace.leaves {
        if model.params.entry(name).map(|e| e.frozen).unwrap_or(true) {
            continue;
        }
        if let Some(buf) = grads.take(*leaf) {
            out.push((name.clone(), buf));
        }
    }
    Ok((loss_value, out))
}

/// Mean loss and mean gradients over a batch. Per-example work fans out
/// over [`GRAD_CHUNKS`] fixed index chunks and is reduced in chunk order,
/// independent of the executing thread count.
pub fn batch_loss_and_grads<S: Scalar>(
    model: &Model<S>,
    data: &[PreparedExample<S>],
    batch: &[usize],
    mode: LossMode,
    loss_cfg: &LossConfig,
) -> Result<(f64, BTreeMap<String, Tensor<S>>)> {
    let chunk_len = batch.len().div_ceil(GRAD_CHUNKS);
    let chunks: Vec<&[usize]> = batch.chunks(chunk_len).collect();
    let partials: Vec<Result<(S, BTreeMap<String, Vec<S>>)>> = chunks
        .par_iter()
        .map(|chunk| {
            let mut acc: BTreeMap<String, Vec<S>> = BTreeMap::new();
            let mut loss_sum = S::zero();
            for &idx in *chunk {
                let (loss, grads) = example_grads(model, &data[idx], mode, loss_cfg)?;
                loss_sum = loss_sum + loss;
                for (name, g) in grads {
                    match acc.get_mut(&name) {
                        Some(buf) => {
                            for (b, &v) in buf.iter_mut().zip(&g) {
                                *b = *b + v;
                            }
                        }
                        None => {
                            acc.insert(name, g);
                        }
                    }
                }
            }
            Ok((loss_sum, acc))
        })
        .collect();

    let inv = S::one() / S::from_f64_c(batch.len() as f64);
    let mut total: BTreeMap<String, Vec<S>> = BTreeMap::new();
    let mut loss_sum = S::zero();
    for partial in partials {
        let (chunk_loss, chunk_grads) = partial?;
        loss_sum = loss_sum + chunk_loss;
        for (name, g) in chunk_grads {
            match total.get_mut(&name) {
                Some(buf) => {
                    for (b, &v) in buf.iter_mut().zip(&g) {
                        *b = *b + v;
                    }
                }
                None => {
                    total.insert(name, g);
                }
            }
        }
    }
    let grads = total
        .into_iter()
        .map(|(name, mut buf)| {
            for v in buf.iter_mut() {
                *v = *v * inv;
            }
            let shape = model.params.expect(&name).shape();
            (name, Tensor::new(shape[0], shape[1], buf))
        })
        .collect();
    Ok((loss_sum.to_f64_c() / batch.len() as f64, grads))
}

/// Train one model at one learning rate; returns the parameters of the
/// best dev-ROC-AUC epoch and the per-epoch report.
pub fn train<S: Scalar>(
    model: &Model<S>,
    train_data: &[PreparedExample<S>],
    dev_data: &[PreparedExample<S>],
    lr: f64,
    config: &TrainConfig,
) -> Result<TrainOutcome<S>> {
    config.validate()?;
    if train_data.is_empty() || dev_data.is_empty() {
        return Err(Error::InvalidTrainConfig(
            "train and dev sets must be non-empty".into(),
        ));
    }
    let mut current = model.clone();
    let mut state = AdamState::new();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut stopper = EarlyStopper::new(config.patience);
    let mut best_params = current.params.clone();
    let mut epochs = Vec::new();
    let mut stopping = StoppingReason::MaxEpochs;

    let mut indices: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 1..=config.max_epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss_sum = 0.0;
        for batch in indices.chunks(config.batch_size) {
            let (batch_loss, grads) =
                batch_loss_and_grads(&current, train_data, batch, config.loss_mode, &config.loss)?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { lr, epoch });
            }
            epoch_loss_sum += batch_loss * batch.len() as f64;
            adamw_step(&mut current.params, &grads, &mut state, lr, &config.adam)?;
        }
        let dev = evaluate(&current, dev_data)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss_sum / train_data.len() as f64,
            dev,
        });
        let (improved, stop) = stopper.observe(epoch, dev.roc_auc);
        if improved {
            best_params = current.params.clone();
        }
        if stop {
            stopping = StoppingReason::Patience;
            break;
        }
    }
    Ok(TrainOutcome {
        model: Model {
            spec: current.spec,
            params: best_params,
            vocab_fingerprint: current.vocab_fingerprint,
        },
        report: TrainReport {
            lr,
            epochs,
            best_epoch: stopper.best_epoch(),
            stopping,
        },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrCandidate {
    pub lr: f64,
    pub dev_roc_auc: Option<f64>,
    pub error: Option<String>,
}

pub struct SweepOutcome<S> {
    pub best: TrainOutcome<S>,
    pub candidates: Vec<LrCandidate>,
}

/// Train one model per candidate learning rate from the same
/// initialization and keep the one with the highest dev ROC AUC; exact
/// ties go to the lower rate. Diverging candidates are recorded and
/// excluded.
pub fn lr_sweep<S: Scalar>(
    model: &Model<S>,
    train_data: &[PreparedExample<S>],
    dev_data: &[PreparedExample<S>],
    config: &TrainConfig,
) -> Result<SweepOutcome<S>> {
    config.validate()?;
    let mut candidates = Vec::new();
    let mut best: Option<TrainOutcome<S>> = None;
    let mut first_error = None;
    for &lr in &config.learning_rates {
        match train(model, train_data, dev_data, lr, config) {
            Ok(outcome) => {
                let auc = outcome.report.best_dev_auc();
                candidates.push(LrCandidate {
                    lr,
                    dev_roc_auc: Some(auc),
                    error: None,
                });
                let replace = match &best {
                    None => true,
                    Some(b) => {
                        let b_auc = b.report.best_dev_auc();
                        auc > b_auc || (auc == b_auc && lr < b.report.lr)
                    }
                };
                if replace {
                    best = Some(outcome);
                }
            }
            Err(e @ (Error::NonFiniteLoss { .. } | Error::NonFiniteGradient(_))) => {
                candidates.push(LrCandidate {
                    lr,
                    dev_roc_auc: None,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
            Err(other) => return Err(other),
        }
    }
    match best {
        Some(best) => Ok(SweepOutcome { best, candidates }),
        None => Err(first_error.expect("at least one candidate ran")),
    }
}

/// Soft-label the corpus with the teacher, concatenate augmented data and
/// run the sweep with the configured KD loss. Augmented examples that
/// already carry teacher logits are used as-is; the rest are labeled here.
pub fn distill<S: Scalar>(
    teacher: &Model<S>,
    student_spec: crate::arch::ModelSpec,
    vocab: &Vocab,
    labeled: &[Example],
    augmented: &[Example],
    dev: &[Example],
    config: &TrainConfig,
) -> Result<SweepOutcome<S>> {
    let student = Model::init_student(student_spec, vocab, config.seed, teacher)?;
    let (mut train_examples, summary) = label_with_teacher(labeled, teacher, vocab)?;
    if summary.skipped > 0 {
        return Err(Error::InvalidTrainConfig(format!(
            "{} corpus examples failed to assemble",
            summary.skipped
        )));
    }
    let (prelabeled, unlabeled): (Vec<Example>, Vec<Example>) = augmented
        .iter()
        .cloned()
        .partition(|e| e.teacher_logits.is_some());
    train_examples.extend(prelabeled);
    let (soft_augmented, _aug_summary) = label_with_teacher(&unlabeled, teacher, vocab)?;
    train_examples.extend(soft_augmented);
    let train_data = prepare::<S>(&train_examples, vocab)?;
    let dev_data = prepare::<S>(dev, vocab)?;
    lr_sweep(&student, &train_data, &dev_data, config)
}
