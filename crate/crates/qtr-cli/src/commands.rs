//! Implementations of the CLI subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use qtr_core::arch::{count_params, ModelSpec};
use qtr_core::augment::{augment, filter_overlap, AugConfig};
use qtr_core::checkpoint;
use qtr_core::corpus::{positive_rate, read_examples, write_examples};
use qtr_core::gen::{generate_synthetic_corpus, GenConfig};
use qtr_core::init::init_params;
use qtr_core::labeling::label_with_teacher;
use qtr_core::loss::LossMode;
use qtr_core::model::Model;
use qtr_core::train::{distill, evaluate, lr_sweep, prepare, SweepOutcome, TrainConfig};
use qtr_core::vocab::Vocab;
use qtr_core::{Bench, Verif};

use crate::bench::{bench_latency, BenchResult};
use crate::config::{KvConfig, Resolved};
use crate::grid::{self, load_bundle, GridSettings};
use crate::eval_record;

const GEN_KEYS: &[&str] = &[
    "train_size",
    "dev_size",
    "test_size",
    "vocab_size",
    "positive_rate",
    "noise_rate",
    "coverage_threshold",
];

const TRAIN_KEYS: &[&str] = &[
    "loss",
    "lr_set",
    "batch_size",
    "max_epochs",
    "patience",
    "weight_decay",
    "beta1",
    "beta2",
    "eps",
    "temperature",
    "hard_blend",
];

fn load_kv(path: &Option<PathBuf>, allowed: &[&str]) -> Result<KvConfig> {
    match path {
        None => Ok(KvConfig::default()),
        Some(p) => {
            let cfg = KvConfig::load(p)?;
            cfg.ensure_known(allowed)?;
            Ok(cfg)
        }
    }
}

/// Common knobs shared by the training-style commands.
#[derive(Debug, Clone, Default)]
pub struct TrainFlags {
    pub config: Option<PathBuf>,
    pub loss: Option<String>,
    pub lr_set: Option<String>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
}

pub fn resolve_train_config(seed: u64, flags: &TrainFlags) -> Result<TrainConfig> {
    let file = load_kv(&flags.config, TRAIN_KEYS)?;
    let mut cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let loss_str = flags
        .loss
        .clone()
        .or(file.get::<String>("loss")?)
        .unwrap_or_else(|| cfg.loss_mode.to_string());
    cfg.loss_mode = loss_str.parse::<LossMode>()?;
    let lr_str = flags.lr_set.clone().or(file.get::<String>("lr_set")?);
    if let Some(lrs) = lr_str {
        cfg.learning_rates = lrs
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| anyhow!("bad learning rate {s}: {e}"))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(v) = flags.batch_size.or(file.get("batch_size")?) {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.max_epochs.or(file.get("max_epochs")?) {
        cfg.max_epochs = v;
    }
    if let Some(v) = flags.patience.or(file.get("patience")?) {
        cfg.patience = v;
    }
    if let Some(v) = file.get("weight_decay")? {
        cfg.adam.weight_decay = v;
    }
    if let Some(v) = file.get("beta1")? {
        cfg.adam.beta1 = v;
    }
    if let Some(v) = file.get("beta2")? {
        cfg.adam.beta2 = v;
    }
    if let Some(v) = file.get("eps")? {
        cfg.adam.eps = v;
    }
    if let Some(v) = file.get("temperature")? {
        cfg.loss.temperature = v;
    }
    if let Some(v) = file.get("hard_blend")? {
        cfg.loss.hard_blend = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn describe_train(resolved: &mut Resolved, cfg: &TrainConfig) {
    resolved.put("loss", cfg.loss_mode);
    resolved.put(
        "lr_set",
        cfg.learning_rates
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    resolved.put("batch_size", cfg.batch_size);
    resolved.put("max_epochs", cfg.max_epochs);
    resolved.put("patience", cfg.patience);
    resolved.put("weight_decay", cfg.adam.weight_decay);
    resolved.put("beta1", cfg.adam.beta1);
    resolved.put("beta2", cfg.adam.beta2);
    resolved.put("eps", cfg.adam.eps);
    resolved.put("temperature", cfg.loss.temperature);
    resolved.put("hard_blend", cfg.loss.hard_blend);
    resolved.put("seed", cfg.seed);
}

/// Parse `--spec`: a named architecture or a JSON spec file.
pub fn resolve_spec(spec: &str, vocab_size: usize, embed_dim: usize) -> Result<ModelSpec> {
    if Path::new(spec).is_file() {
        let text = fs::read_to_string(spec)?;
        let parsed: ModelSpec = serde_json::from_str(&text)
            .with_context(|| format!("parsing spec file {spec}"))?;
        parsed.validate()?;
        return Ok(parsed);
    }
    Ok(ModelSpec::named(spec, vocab_size, embed_dim)?)
}

pub fn gen_data(
    out: &Path,
    seed: u64,
    config: Option<PathBuf>,
    overrides: &[(&str, Option<String>)],
) -> Result<()> {
    let file = load_kv(&config, GEN_KEYS)?;
    let mut cfg = GenConfig::default();
    let set = |key: &str, cfg: &mut GenConfig, value: &str| -> Result<()> {
        match key {
            "train_size" => cfg.train_size = value.parse()?,
            "dev_size" => cfg.dev_size = value.parse()?,
            "test_size" => cfg.test_size = value.parse()?,
            "vocab_size" => cfg.vocab_size = value.parse()?,
            "positive_rate" => cfg.positive_rate = value.parse()?,
            "noise_rate" => cfg.noise_rate = value.parse()?,
            "coverage_threshold" => cfg.coverage_threshold = value.parse()?,
            other => bail!("unknown gen key {other}"),
        }
        Ok(())
    };
    for key in GEN_KEYS {
        if let Some(v) = file.get::<String>(key)? {
            set(key, &mut cfg, &v)?;
        }
    }
    for (key, value) in overrides {
        if let Some(v) = value {
            set(key, &mut cfg, v)?;
        }
    }

    let generated = generate_synthetic_corpus(&cfg, seed)?;
    fs::create_dir_all(out)?;
    generated.vocab.save(out.join("vocab.txt"))?;
    generated.split.save(out)?;

    let mut resolved = Resolved::new();
    resolved.put("command", "gen-data");
    resolved.put("seed", seed);
    resolved.put("train_size", cfg.train_size);
    resolved.put("dev_size", cfg.dev_size);
    resolved.put("test_size", cfg.test_size);
    resolved.put("vocab_size", cfg.vocab_size);
    resolved.put("positive_rate", cfg.positive_rate);
    resolved.put("noise_rate", cfg.noise_rate);
    resolved.put("coverage_threshold", cfg.coverage_threshold);
    resolved.print("gen-data");
    resolved.write(out.join("gen.resolved.cfg"))?;

    let rates = generated.split.positive_rates();
    println!(
        "wrote {} train / {} dev / {} test examples to {} (positive rates {:.4} / {:.4} / {:.4})",
        generated.split.train.len(),
        generated.split.dev.len(),
        generated.split.test.len(),
        out.display(),
        rates[0],
        rates[1],
        rates[2],
    );
    Ok(())
}

fn write_sweep_artifacts(
    out_dir: &Path,
    ckpt_name: &str,
    sweep: &SweepOutcome<Verif>,
    resolved: &Resolved,
    meta_extra: &[(&str, String)],
) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let ckpt_path = out_dir.join(ckpt_name);
    let mut meta = BTreeMap::new();
    meta.insert("selected_lr".to_string(), sweep.best.report.lr.to_string());
    meta.insert(
        "best_epoch".to_string(),
        sweep.best.report.best_epoch.to_string(),
    );
    for (k, v) in meta_extra {
        meta.insert((*k).to_string(), v.clone());
    }
    checkpoint::save(&sweep.best.model, &meta, &ckpt_path)?;
    fs::write(out_dir.join("report.tsv"), sweep.best.report.to_tsv())?;
    let mut table = String::from("lr\tdev_roc_auc\terror\n");
    for c in &sweep.candidates {
        table.push_str(&format!(
            "{}\t{}\t{}\n",
            c.lr,
            c.dev_roc_auc.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            c.error.clone().unwrap_or_default()
        ));
    }
    fs::write(out_dir.join("sweep.tsv"), table)?;
    resolved.write(out_dir.join("run.resolved.cfg"))?;
    Ok(ckpt_path)
}

pub fn train_teacher(
    data: &Path,
    out: &Path,
    seed: u64,
    spec_name: &str,
    embed_dim: usize,
    flags: &TrainFlags,
) -> Result<()> {
    let bundle = load_bundle(data)?;
    let cfg = resolve_train_config(seed, flags)?;
    let mut spec = resolve_spec(spec_name, bundle.vocab.len(), embed_dim)?;
    spec.embedding_trainable = true;
    let model = Model::<Verif>::init(spec, &bundle.vocab, seed)?;
    let train_data = prepare::<Verif>(&bundle.split.train, &bundle.vocab)?;
    let dev_data = prepare::<Verif>(&bundle.split.dev, &bundle.vocab)?;
    let sweep = lr_sweep(&model, &train_data, &dev_data, &cfg)?;

    let mut resolved = Resolved::new();
    resolved.put("command", "train-teacher");
    resolved.put("data", data.display());
    resolved.put("spec", spec_name);
    resolved.put("embed_dim", embed_dim);
    describe_train(&mut resolved, &cfg);
    resolved.put("selected_lr", sweep.best.report.lr);
    resolved.print("train-teacher");

    let ckpt = write_sweep_artifacts(
        out,
        "teacher.ckpt",
        &sweep,
        &resolved,
        &[("role", "teacher".into()), ("spec", spec_name.into())],
    )?;
    println!(
        "teacher saved to {} (best dev ROC AUC {:.4}, lr {}, stopped by {})",
        ckpt.display(),
        sweep.best.report.best_dev_auc() * 100.0,
        sweep.best.report.lr,
        sweep.best.report.stopping,
    );
    Ok(())
}

pub fn train_student(
    data: &Path,
    teacher_ckpt: &Path,
    out: &Path,
    seed: u64,
    spec_name: &str,
    flags: &TrainFlags,
) -> Result<()> {
    let bundle = load_bundle(data)?;
    let teacher: Model<Verif> = checkpoint::load_model(teacher_ckpt, Some(&bundle.vocab))?;
    let mut cfg = resolve_train_config(seed, flags)?;
    if flags.loss.is_none() {
        cfg.loss_mode = LossMode::HardCe;
    }
    let spec = resolve_spec(spec_name, bundle.vocab.len(), teacher.spec.embed_dim)?;
    let sweep = if cfg.loss_mode == LossMode::HardCe {
        let student = Model::init_student(spec, &bundle.vocab, seed, &teacher)?;
        let train_data = prepare::<Verif>(&bundle.split.train, &bundle.vocab)?;
        let dev_data = prepare::<Verif>(&bundle.split.dev, &bundle.vocab)?;
        lr_sweep(&student, &train_data, &dev_data, &cfg)?
    } else {
        distill(
            &teacher,
            spec,
            &bundle.vocab,
            &bundle.split.train,
            &[],
            &bundle.split.dev,
            &cfg,
        )?
    };

    let mut resolved = Resolved::new();
    resolved.put("command", "train");
    resolved.put("data", data.display());
    resolved.put("teacher", teacher_ckpt.display());
    resolved.put("spec", spec_name);
    describe_train(&mut resolved, &cfg);
    resolved.put("selected_lr", sweep.best.report.lr);
    resolved.print("train");

    let ckpt = write_sweep_artifacts(
        out,
        "model.ckpt",
        &sweep,
        &resolved,
        &[("spec", spec_name.into())],
    )?;
    println!(
        "student saved to {} (best dev ROC AUC {:.4}, lr {})",
        ckpt.display(),
        sweep.best.report.best_dev_auc() * 100.0,
        sweep.best.report.lr,
    );
    Ok(())
}

pub fn distill_student(
    data: &Path,
    teacher_ckpt: &Path,
    out: &Path,
    seed: u64,
    spec_name: &str,
    aug_file: Option<&Path>,
    flags: &TrainFlags,
) -> Result<()> {
    let bundle = load_bundle(data)?;
    let teacher: Model<Verif> = checkpoint::load_model(teacher_ckpt, Some(&bundle.vocab))?;
    let mut cfg = resolve_train_config(seed, flags)?;
    if flags.loss.is_none() && cfg.loss_mode == LossMode::HardCe {
        cfg.loss_mode = LossMode::KdMse;
    }
    let augmented = match aug_file {
        Some(path) => read_examples(path)?,
        None => Vec::new(),
    };
    let spec = resolve_spec(spec_name, bundle.vocab.len(), teacher.spec.embed_dim)?;
    let sweep = distill(
        &teacher,
        spec,
        &bundle.vocab,
        &bundle.split.train,
        &augmented,
        &bundle.split.dev,
        &cfg,
    )?;

    let mut resolved = Resolved::new();
    resolved.put("command", "distill");
    resolved.put("data", data.display());
    resolved.put("teacher", teacher_ckpt.display());
    resolved.put("spec", spec_name);
    resolved.put("augmented_examples", augmented.len());
    describe_train(&mut resolved, &cfg);
    resolved.put("selected_lr", sweep.best.report.lr);
    resolved.print("distill");

    let ckpt = write_sweep_artifacts(
        out,
        "model.ckpt",
        &sweep,
        &resolved,
        &[("spec", spec_name.into()), ("regime", "distill".into())],
    )?;
    println!(
        "distilled student saved to {} (best dev ROC AUC {:.4}, lr {})",
        ckpt.display(),
        sweep.best.report.best_dev_auc() * 100.0,
        sweep.best.report.lr,
    );
    Ok(())
}

pub fn augment_cmd(
    data: &Path,
    out: &Path,
    mult: usize,
    seed: u64,
    weights: (f64, f64, f64),
) -> Result<()> {
    let bundle = load_bundle(data)?;
    let aug_cfg = AugConfig {
        mask_weight: weights.0,
        ngram_weight: weights.1,
        resample_weight: weights.2,
    };
    let n = mult * bundle.split.train.len();
    let raw = augment(
        &bundle.split.train,
        &bundle.world,
        &bundle.gen_cfg,
        &aug_cfg,
        n,
        seed,
    )?;
    let raw_len = raw.len();
    let filtered = filter_overlap(raw, &bundle.split.dev, &bundle.split.test);

    let mut resolved = Resolved::new();
    resolved.put("command", "augment");
    resolved.put("data", data.display());
    resolved.put("mult", mult);
    resolved.put("requested", n);
    resolved.put("seed", seed);
    resolved.put("mask_weight", aug_cfg.mask_weight);
    resolved.put("ngram_weight", aug_cfg.ngram_weight);
    resolved.put("resample_weight", aug_cfg.resample_weight);
    resolved.print("augment");

    write_examples(out, &filtered)?;
    resolved.write(out.with_extension("resolved.cfg"))?;
    println!(
        "wrote {} unlabeled examples to {} ({} removed by dev/test overlap filtering)",
        filtered.len(),
        out.display(),
        raw_len - filtered.len(),
    );
    Ok(())
}

pub fn label_cmd(ckpt: &Path, data: &Path, vocab_path: &Path, out: &Path) -> Result<()> {
    let vocab = Vocab::load(vocab_path)?;
    let teacher: Model<Verif> = checkpoint::load_model(ckpt, Some(&vocab))?;
    let examples = read_examples(data)?;
    let (labeled, summary) = label_with_teacher(&examples, &teacher, &vocab)?;
    write_examples(out, &labeled)?;

    let mut resolved = Resolved::new();
    resolved.put("command", "label");
    resolved.put("ckpt", ckpt.display());
    resolved.put("data", data.display());
    resolved.put("vocab", vocab_path.display());
    resolved.print("label");
    resolved.write(out.with_extension("resolved.cfg"))?;
    println!(
        "labeled {} examples to {} ({} skipped as unassemblable)",
        summary.labeled,
        out.display(),
        summary.skipped,
    );
    Ok(())
}

pub fn eval_cmd(ckpt: &Path, data: &Path, vocab_path: &Path) -> Result<()> {
    let vocab = Vocab::load(vocab_path)?;
    let model: Model<Verif> = checkpoint::load_model(ckpt, Some(&vocab))?;
    let examples = read_examples(data)?;
    let prepared = prepare::<Verif>(&examples, &vocab)?;
    let metrics = evaluate(&model, &prepared)?;

    let mut resolved = Resolved::new();
    resolved.put("command", "eval");
    resolved.put("ckpt", ckpt.display());
    resolved.put("data", data.display());
    resolved.put("examples", prepared.len());
    resolved.print("eval");
    println!("{}", eval_record(&model.spec.name, &metrics));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn bench_cmd(
    ckpts: &[PathBuf],
    seq_len: usize,
    batch: usize,
    iters: usize,
    warmup: usize,
    seed: u64,
    precision: &str,
    out: Option<&Path>,
) -> Result<()> {
    let mut resolved = Resolved::new();
    resolved.put("command", "bench");
    resolved.put("seq_len", seq_len);
    resolved.put("batch", batch);
    resolved.put("iters", iters);
    resolved.put("warmup", warmup);
    resolved.put("seed", seed);
    resolved.put("precision", precision);
    resolved.print("bench");

    let mut rows = vec![BenchResult::tsv_header().to_string()];
    for ckpt in ckpts {
        let result = match precision {
            "f32" => {
                let model: Model<Bench> = checkpoint::load_model(ckpt, None)?;
                bench_latency(&model, seq_len, batch, iters, warmup, seed)?
            }
            "f64" => {
                let model: Model<Verif> = checkpoint::load_model(ckpt, None)?;
                bench_latency(&model, seq_len, batch, iters, warmup, seed)?
            }
            other => bail!("precision must be f32 or f64, got {other}"),
        };
        rows.push(result.to_tsv_row());
    }
    let table = rows.join("\n") + "\n";
    print!("{table}");
    if let Some(path) = out {
        fs::write(path, table)?;
    }
    Ok(())
}

pub fn params_cmd(spec_name: &str, vocab_size: usize, embed_dim: usize) -> Result<()> {
    let spec = resolve_spec(spec_name, vocab_size, embed_dim)?;
    let counts = count_params(&spec)?;
    // enumeration cross-check at a size cheap enough to instantiate
    let small = ModelSpec {
        vocab_size: 64,
        ..spec.clone()
    };
    let small_counts = count_params(&small)?;
    let store = init_params::<Verif>(&small, 0);
    if store.trainable_value_count() != small_counts.trainable
        || store.frozen_value_count() != small_counts.frozen
    {
        bail!("internal error: analytic count disagrees with the instantiated store");
    }
    println!(
        "spec={} layers={} d_h={} embed_dim={} vocab_size={} positions={}",
        spec.name,
        spec.num_layers(),
        spec.d_h(),
        spec.embed_dim,
        spec.vocab_size,
        spec.num_positions,
    );
    println!(
        "trainable={} ({:.2}M)",
        counts.trainable,
        counts.trainable as f64 / 1e6
    );
    println!("frozen={} ({:.2}M)", counts.frozen, counts.frozen as f64 / 1e6);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn grid_cmd(
    data: &Path,
    out: &Path,
    seed: u64,
    teacher_ckpt: Option<&Path>,
    teacher_spec: &str,
    embed_dim: usize,
    mult: usize,
    flags: &TrainFlags,
) -> Result<()> {
    let bundle = load_bundle(data)?;
    let cfg = resolve_train_config(seed, flags)?;
    fs::create_dir_all(out)?;

    let teacher: Model<Verif> = match teacher_ckpt {
        Some(path) => checkpoint::load_model(path, Some(&bundle.vocab))?,
        None => {
            println!("no teacher checkpoint given; training the teacher first");
            train_teacher(data, out, seed, teacher_spec, embed_dim, flags)?;
            checkpoint::load_model(out.join("teacher.ckpt"), Some(&bundle.vocab))?
        }
    };

    let settings = GridSettings {
        seed,
        train: cfg.clone(),
        aug_multiplier: mult,
        aug: AugConfig::default(),
        embed_dim: teacher.spec.embed_dim,
        student_names: ModelSpec::student_grid_names()
            .into_iter()
            .map(String::from)
            .collect(),
    };

    let mut resolved = Resolved::new();
    resolved.put("command", "grid");
    resolved.put("data", data.display());
    resolved.put("aug_multiplier", mult);
    resolved.put("embed_dim", settings.embed_dim);
    describe_train(&mut resolved, &cfg);
    resolved.print("grid");
    resolved.write(out.join("grid.resolved.cfg"))?;

    let output = grid::run_table_grid(&bundle, &teacher, out, &settings)?;
    println!(
        "teacher test: {}",
        eval_record("teacher", &output.teacher_test)
    );
    let failures: Vec<&grid::CellOutcome> =
        output.cells.iter().filter(|c| c.error.is_some()).collect();
    println!(
        "grid complete: {} cells, {} failed; tables in {}",
        output.cells.len(),
        failures.len(),
        out.display(),
    );
    for f in failures {
        println!("  failed cell {} {}: {}", f.spec_name, f.regime, f.error.as_deref().unwrap());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_cmd(
    data: &Path,
    out: &Path,
    seed: u64,
    teacher_ckpt: &Path,
    mult_set: &str,
    flags: &TrainFlags,
) -> Result<()> {
    let bundle = load_bundle(data)?;
    let teacher: Model<Verif> = checkpoint::load_model(teacher_ckpt, Some(&bundle.vocab))?;
    let cfg = resolve_train_config(seed, flags)?;
    let multipliers: Vec<usize> = mult_set
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| anyhow!("bad multiplier {s}: {e}")))
        .collect::<Result<_>>()?;

    let settings = GridSettings {
        seed,
        train: cfg.clone(),
        aug_multiplier: 0,
        aug: AugConfig::default(),
        embed_dim: teacher.spec.embed_dim,
        student_names: vec![],
    };

    let mut resolved = Resolved::new();
    resolved.put("command", "sweep");
    resolved.put("data", data.display());
    resolved.put("teacher", teacher_ckpt.display());
    resolved.put("mult_set", mult_set);
    describe_train(&mut resolved, &cfg);
    resolved.print("sweep");
    fs::create_dir_all(out)?;
    resolved.write(out.join("sweep.resolved.cfg"))?;

    let points = grid::run_augmentation_sweep(&bundle, &teacher, &multipliers, out, &settings)?;
    println!(
        "sweep complete: {} points written to {}",
        points.len(),
        out.join("augmentation_curve.tsv").display(),
    );
    for p in &points {
        println!(
            "  {} x{}: student {:.4} vs teacher {:.4} (relative error {:.2}%)",
            p.spec_name,
            p.multiplier,
            p.student_test_auc * 100.0,
            p.teacher_test_auc * 100.0,
            p.relative_error_pct,
        );
    }
    Ok(())
}

/// Positive-rate summary of a dataset file, used by tests and users alike.
pub fn rate_of(path: &Path) -> Result<f64> {
    Ok(positive_rate(&read_examples(path)?))
}
