//! `qtr` — train, distill, evaluate and latency-benchmark tiny query-title
//! relevance classifiers on a synthetic corpus.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qtr_cli::commands::{self, TrainFlags};

#[derive(Parser)]
#[command(name = "qtr", version, about = "Tiny query-title relevance classifiers: data, distillation, evaluation, latency")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    /// Flat key=value config file (flags win over file values)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Loss mode: hard_ce, kd_mse or kd_soft_ce
    #[arg(long)]
    loss: Option<String>,
    /// Comma-separated learning-rate candidates, e.g. 1e-3,0.5e-4,1e-4
    #[arg(long = "lr-set")]
    lr_set: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

impl From<&TrainArgs> for TrainFlags {
    fn from(a: &TrainArgs) -> Self {
        TrainFlags {
            config: a.config.clone(),
            loss: a.loss.clone(),
            lr_set: a.lr_set.clone(),
            batch_size: a.batch_size,
            max_epochs: a.max_epochs,
            patience: a.patience,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic query-title corpus (vocab + train/dev/test)
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Flat key=value config file
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        train_size: Option<String>,
        #[arg(long)]
        dev_size: Option<String>,
        #[arg(long)]
        test_size: Option<String>,
        #[arg(long)]
        vocab_size: Option<String>,
        #[arg(long)]
        positive_rate: Option<String>,
        #[arg(long)]
        noise_rate: Option<String>,
    },
    /// Train the teacher (trainable embedding table) with the LR sweep
    TrainTeacher {
        /// Corpus directory produced by gen-data
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Architecture name (e.g. teacher, bert-student-2x64) or spec file
        #[arg(long, default_value = "teacher")]
        spec: String,
        /// Embedding table width
        #[arg(long, default_value_t = qtr_core::arch::DEFAULT_EMBED_DIM)]
        embed_dim: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Produce unlabeled augmentation pairs (masking, spans, resampling)
    Augment {
        #[arg(long)]
        data: PathBuf,
        /// Output TSV of unlabeled pairs
        #[arg(long)]
        out: PathBuf,
        /// Size as a multiple of the training set
        #[arg(long, default_value_t = 1)]
        mult: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        mask_weight: f64,
        #[arg(long, default_value_t = 1.0)]
        ngram_weight: f64,
        #[arg(long, default_value_t = 2.0)]
        resample_weight: f64,
    },
    /// Attach teacher logits to a dataset file
    Label {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a student on hard labels (embeddings from the teacher)
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Teacher checkpoint supplying the frozen embedding table
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        spec: String,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Distill a student from a teacher (optionally with augmented data)
    Distill {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        spec: String,
        /// Augmentation TSV (unlabeled or already soft-labeled)
        #[arg(long)]
        aug: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate a checkpoint: ROC AUC, AvgPrec, CE
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        /// Labeled TSV file
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Measure single-threaded CPU inference latency
    Bench {
        /// One or more checkpoints; one table row each
        #[arg(long, required = true)]
        ckpt: Vec<PathBuf>,
        #[arg(long, default_value_t = 22)]
        seq_len: usize,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 100)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// f32 (benchmark mode) or f64 (verification mode)
        #[arg(long, default_value = "f32")]
        precision: String,
        /// Optional output file for the latency table
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print trainable/frozen parameter counts for a spec
    Params {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = qtr_core::arch::DEFAULT_VOCAB_SIZE)]
        vocab_size: usize,
        #[arg(long, default_value_t = qtr_core::arch::DEFAULT_EMBED_DIM)]
        embed_dim: usize,
    },
    /// Train every student spec under KD+augmentation, KD-only and hard
    /// targets; emit the quality tables
    Grid {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reuse an existing teacher checkpoint
        #[arg(long)]
        teacher_ckpt: Option<PathBuf>,
        /// Teacher architecture when training one here
        #[arg(long, default_value = "teacher")]
        teacher_spec: String,
        #[arg(long, default_value_t = qtr_core::arch::DEFAULT_EMBED_DIM)]
        embed_dim: usize,
        /// Augmentation multiplier for the KD+augmentation regime
        #[arg(long, default_value_t = 4)]
        mult: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Distill the three-layer specs at several augmentation multipliers
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        teacher_ckpt: PathBuf,
        /// Comma-separated multipliers
        #[arg(long, default_value = "0,1,2,4,8")]
        mult_set: String,
        #[command(flatten)]
        train: TrainArgs,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenData {
            out,
            seed,
            config,
            train_size,
            dev_size,
            test_size,
            vocab_size,
            positive_rate,
            noise_rate,
        } => {
            let overrides = [
                ("train_size", train_size),
                ("dev_size", dev_size),
                ("test_size", test_size),
                ("vocab_size", vocab_size),
                ("positive_rate", positive_rate),
                ("noise_rate", noise_rate),
            ];
            commands::gen_data(&out, seed, config, &overrides)
        }
        Command::TrainTeacher {
            data,
            out,
            seed,
            spec,
            embed_dim,
            train,
        } => commands::train_teacher(&data, &out, seed, &spec, embed_dim, &(&train).into()),
        Command::Augment {
            data,
            out,
            mult,
            seed,
            mask_weight,
            ngram_weight,
            resample_weight,
        } => commands::augment_cmd(&data, &out, mult, seed, (mask_weight, ngram_weight, resample_weight)),
        Command::Label {
            ckpt,
            data,
            vocab,
            out,
        } => commands::label_cmd(&ckpt, &data, &vocab, &out),
        Command::Train {
            data,
            ckpt,
            out,
            seed,
            spec,
            train,
        } => commands::train_student(&data, &ckpt, &out, seed, &spec, &(&train).into()),
        Command::Distill {
            data,
            ckpt,
            out,
            seed,
            spec,
            aug,
            train,
        } => commands::distill_student(&data, &ckpt, &out, seed, &spec, aug.as_deref(), &(&train).into()),
        Command::Eval { ckpt, data, vocab } => commands::eval_cmd(&ckpt, &data, &vocab),
        Command::Bench {
            ckpt,
            seq_len,
            batch,
            iters,
            warmup,
            seed,
            precision,
            out,
        } => commands::bench_cmd(&ckpt, seq_len, batch, iters, warmup, seed, &precision, out.as_deref()),
        Command::Params {
            spec,
            vocab_size,
            embed_dim,
        } => commands::params_cmd(&spec, vocab_size, embed_dim),
        Command::Grid {
            data,
            out,
            seed,
            teacher_ckpt,
            teacher_spec,
            embed_dim,
            mult,
            train,
        } => commands::grid_cmd(
            &data,
            &out,
            seed,
            teacher_ckpt.as_deref(),
            &teacher_spec,
            embed_dim,
            mult,
            &(&train).into(),
        ),
        Command::Sweep {
            data,
            out,
            seed,
            teacher_ckpt,
            mult_set,
            train,
        } => commands::sweep_cmd(&data, &out, seed, &teacher_ckpt, &mult_set, &(&train).into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
