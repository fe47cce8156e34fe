//! Experiment grids: every student architecture under three training
//! regimes, and the augmentation-scaling sweep for the three-layer models.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use qtr_core::arch::ModelSpec;
use qtr_core::augment::{augment, filter_overlap, AugConfig};
use qtr_core::corpus::{CorpusSplit, Example};
use qtr_core::gen::{GenConfig, World};
use qtr_core::labeling::label_with_teacher;
use qtr_core::loss::LossMode;
use qtr_core::model::Model;
use qtr_core::train::{evaluate, lr_sweep, prepare, EvalMetrics, PreparedExample, SweepOutcome, TrainConfig};
use qtr_core::vocab::Vocab;
use qtr_core::{checkpoint, Verif};

use crate::config::Resolved;

/// A generated dataset directory: vocabulary, splits and the generator
/// config that produced them (needed to resample for augmentation).
pub struct DataBundle {
    pub vocab: Vocab,
    pub split: CorpusSplit,
    pub gen_cfg: GenConfig,
    pub gen_seed: u64,
    pub world: World,
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<DataBundle> {
    let dir = dir.as_ref();
    let vocab = Vocab::load(dir.join("vocab.txt"))
        .with_context(|| format!("loading {}", dir.join("vocab.txt").display()))?;
    let split = CorpusSplit::load(dir).with_context(|| format!("loading splits from {}", dir.display()))?;
    let cfg_file = crate::config::KvConfig::load(dir.join("gen.resolved.cfg"))?;
    let gen_seed: u64 = cfg_file
        .get("seed")?
        .ok_or_else(|| anyhow!("gen.resolved.cfg lacks seed"))?;
    let gen_cfg = GenConfig {
        train_size: cfg_file.get("train_size")?.unwrap_or(0),
        dev_size: cfg_file.get("dev_size")?.unwrap_or(0),
        test_size: cfg_file.get("test_size")?.unwrap_or(0),
        vocab_size: cfg_file
            .get("vocab_size")?
            .ok_or_else(|| anyhow!("gen.resolved.cfg lacks vocab_size"))?,
        positive_rate: cfg_file.get("positive_rate")?.unwrap_or(0.785),
        noise_rate: cfg_file.get("noise_rate")?.unwrap_or(0.1),
        coverage_threshold: cfg_file.get("coverage_threshold")?.unwrap_or(0.6),
    };
    let (world, rebuilt_vocab) = World::build(&gen_cfg, gen_seed)?;
    if rebuilt_vocab.fingerprint() != vocab.fingerprint() {
        return Err(anyhow!(
            "vocab.txt does not match the generator config in gen.resolved.cfg"
        ));
    }
    Ok(DataBundle {
        vocab,
        split,
        gen_cfg,
        gen_seed,
        world,
    })
}

/// Build, overlap-filter and teacher-label `multiplier x |train|` unlabeled
/// pairs. Deterministic in (bundle, settings seed); a larger multiplier
/// extends the smaller one.
pub fn build_augmented(
    bundle: &DataBundle,
    teacher: &Model<Verif>,
    aug_cfg: &AugConfig,
    multiplier: usize,
    seed: u64,
) -> Result<Vec<Example>> {
    if multiplier == 0 {
        return Ok(Vec::new());
    }
    let n = multiplier * bundle.split.train.len();
    let raw = augment(&bundle.split.train, &bundle.world, &bundle.gen_cfg, aug_cfg, n, seed)?;
    let filtered = filter_overlap(raw, &bundle.split.dev, &bundle.split.test);
    let (labeled, _) = label_with_teacher(&filtered, teacher, &bundle.vocab)?;
    Ok(labeled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Distillation on the original corpus plus augmented data.
    KdAug,
    /// Distillation on the original corpus only.
    KdOnly,
    /// Hard ground-truth labels only.
    Hard,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::KdAug => "kd_aug",
            Regime::KdOnly => "kd_only",
            Regime::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridSettings {
    pub seed: u64,
    pub train: TrainConfig,
    pub aug_multiplier: usize,
    pub aug: AugConfig,
    pub embed_dim: usize,
    pub student_names: Vec<String>,
}

impl GridSettings {
    pub fn desk_default(seed: u64) -> Self {
        Self {
            seed,
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            aug_multiplier: 4,
            aug: AugConfig::default(),
            embed_dim: qtr_core::arch::DEFAULT_EMBED_DIM,
            student_names: ModelSpec::student_grid_names()
                .into_iter()
                .map(String::from)
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub spec_name: String,
    pub regime: &'static str,
    pub layers: usize,
    pub d_h: usize,
    pub trainable_params: usize,
    pub dev_auc: Option<f64>,
    pub test: Option<EvalMetrics>,
    pub error: Option<String>,
}

pub struct GridOutput {
    pub teacher_test: EvalMetrics,
    pub cells: Vec<CellOutcome>,
}

/// Train one student spec on prepared (already soft-labeled, already
/// tokenized) data. Shared by the grid and the augmentation sweep so that
/// equal inputs give bit-equal results.
pub fn distill_cell(
    teacher: &Model<Verif>,
    spec: ModelSpec,
    vocab: &Vocab,
    train_data: &[PreparedExample<Verif>],
    dev_data: &[PreparedExample<Verif>],
    config: &TrainConfig,
) -> qtr_core::Result<SweepOutcome<Verif>> {
    let student = Model::init_student(spec, vocab, config.seed, teacher)?;
    lr_sweep(&student, train_data, dev_data, config)
}

fn cell_dir(out_dir: &Path, spec: &str, regime: &str) -> PathBuf {
    out_dir.join("cells").join(format!("{spec}__{regime}"))
}

fn run_cell(
    bundle: &DataBundle,
    teacher: &Model<Verif>,
    settings: &GridSettings,
    out_dir: &Path,
    spec_name: &str,
    regime: Regime,
    train_data: &[PreparedExample<Verif>],
    dev_data: &[PreparedExample<Verif>],
    test_data: &[PreparedExample<Verif>],
) -> CellOutcome {
    let run = || -> Result<(f64, EvalMetrics)> {
        let spec = ModelSpec::named(spec_name, bundle.vocab.len(), settings.embed_dim)?;
        let mut config = settings.train.clone();
        config.loss_mode = match regime {
            Regime::Hard => LossMode::HardCe,
            _ => match settings.train.loss_mode {
                LossMode::HardCe => LossMode::KdMse,
                kd => kd,
            },
        };
        let sweep = distill_cell(teacher, spec, &bundle.vocab, train_data, dev_data, &config)?;
        let test = evaluate(&sweep.best.model, test_data)?;

        let dir = cell_dir(out_dir, spec_name, regime.name());
        fs::create_dir_all(&dir)?;
        let mut meta = std::collections::BTreeMap::new();
        meta.insert("spec".to_string(), spec_name.to_string());
        meta.insert("regime".to_string(), regime.name().to_string());
        meta.insert("selected_lr".to_string(), sweep.best.report.lr.to_string());
        meta.insert("seed".to_string(), config.seed.to_string());
        checkpoint::save(&sweep.best.model, &meta, dir.join("model.ckpt"))?;
        fs::write(dir.join("report.tsv"), sweep.best.report.to_tsv())?;
        let mut resolved = Resolved::new();
        resolved.put("spec", spec_name);
        resolved.put("regime", regime.name());
        resolved.put("loss", config.loss_mode);
        resolved.put("seed", config.seed);
        resolved.put(
            "lr_set",
            config
                .learning_rates
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        resolved.put("selected_lr", sweep.best.report.lr);
        resolved.put("batch_size", config.batch_size);
        resolved.put("max_epochs", config.max_epochs);
        resolved.put("patience", config.patience);
        resolved.put("train_examples", train_data.len());
        resolved.write(dir.join("run.resolved.cfg"))?;

        Ok((sweep.best.report.best_dev_auc(), test))
    };

    let spec_info = ModelSpec::named(spec_name, bundle.vocab.len(), settings.embed_dim)
        .expect("grid names are valid");
    let counts = qtr_core::arch::count_params(&spec_info).expect("grid specs count");
    match run() {
        Ok((dev_auc, test)) => CellOutcome {
            spec_name: spec_name.to_string(),
            regime: regime.name(),
            layers: spec_info.num_layers(),
            d_h: spec_info.d_h(),
            trainable_params: counts.trainable,
            dev_auc: Some(dev_auc),
            test: Some(test),
            error: None,
        },
        Err(e) => CellOutcome {
            spec_name: spec_name.to_string(),
            regime: regime.name(),
            layers: spec_info.num_layers(),
            d_h: spec_info.d_h(),
            trainable_params: counts.trainable,
            dev_auc: None,
            test: None,
            error: Some(e.to_string()),
        },
    }
}

/// Train every grid student under the three regimes and write the two
/// quality tables. Cell failures are recorded; the grid continues.
pub fn run_table_grid(
    bundle: &DataBundle,
    teacher: &Model<Verif>,
    out_dir: &Path,
    settings: &GridSettings,
) -> Result<GridOutput> {
    fs::create_dir_all(out_dir)?;
    let dev_data = prepare::<Verif>(&bundle.split.dev, &bundle.vocab)?;
    let test_data = prepare::<Verif>(&bundle.split.test, &bundle.vocab)?;
    let teacher_test = evaluate(teacher, &test_data)?;

    let (soft_train, _) = label_with_teacher(&bundle.split.train, teacher, &bundle.vocab)?;
    let augmented = build_augmented(bundle, teacher, &settings.aug, settings.aug_multiplier, settings.seed)?;
    let mut kd_aug_examples = soft_train.clone();
    kd_aug_examples.extend(augmented);

    let hard_data = prepare::<Verif>(&bundle.split.train, &bundle.vocab)?;
    let kd_only_data = prepare::<Verif>(&soft_train, &bundle.vocab)?;
    let kd_aug_data = prepare::<Verif>(&kd_aug_examples, &bundle.vocab)?;

    let jobs: Vec<(String, Regime)> = settings
        .student_names
        .iter()
        .flat_map(|name| {
            [Regime::KdAug, Regime::KdOnly, Regime::Hard]
                .into_iter()
                .map(move |r| (name.clone(), r))
        })
        .collect();

    let cells: Vec<CellOutcome> = jobs
        .par_iter()
        .map(|(name, regime)| {
            let train_data = match regime {
                Regime::KdAug => &kd_aug_data,
                Regime::KdOnly => &kd_only_data,
                Regime::Hard => &hard_data,
            };
            run_cell(
                bundle, teacher, settings, out_dir, name, *regime, train_data, &dev_data,
                &test_data,
            )
        })
        .collect();

    let output = GridOutput {
        teacher_test,
        cells,
    };
    fs::write(out_dir.join("quality_grid.tsv"), quality_grid_tsv(&output))?;
    fs::write(out_dir.join("kd_vs_hard.tsv"), kd_vs_hard_tsv(&output))?;
    Ok(output)
}

fn fmt_pct(v: f64) -> String {
    format!("{:.4}", v * 100.0)
}

/// Teacher plus every student under KD with augmentation.
pub fn quality_grid_tsv(out: &GridOutput) -> String {
    let mut s = String::from(
        "model\tL\td_h\troc_auc\tavg_prec\tce\tparams\troc_auc_raw\tavg_prec_raw\tce_raw\terror\n",
    );
    let t = &out.teacher_test;
    s.push_str(&format!(
        "teacher\t-\t-\t{}\t{}\t{:.4}\t-\t{}\t{}\t{}\t\n",
        fmt_pct(t.roc_auc),
        fmt_pct(t.avg_prec),
        t.ce,
        t.roc_auc,
        t.avg_prec,
        t.ce
    ));
    for cell in out.cells.iter().filter(|c| c.regime == "kd_aug") {
        match (&cell.test, &cell.error) {
            (Some(m), _) => s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.4}\t{}\t{}\t{}\t{}\t\n",
                cell.spec_name,
                cell.layers,
                cell.d_h,
                fmt_pct(m.roc_auc),
                fmt_pct(m.avg_prec),
                m.ce,
                cell.trainable_params,
                m.roc_auc,
                m.avg_prec,
                m.ce
            )),
            (None, err) => s.push_str(&format!(
                "{}\t{}\t{}\t-\t-\t-\t{}\t-\t-\t-\t{}\n",
                cell.spec_name,
                cell.layers,
                cell.d_h,
                cell.trainable_params,
                err.as_deref().unwrap_or("unknown")
            )),
        }
    }
    s
}

/// Paired KD-only vs hard-target test ROC AUC per student.
pub fn kd_vs_hard_tsv(out: &GridOutput) -> String {
    let mut s = String::from("model\tL\td_h\tkd\tno_kd\tparams\tkd_raw\tno_kd_raw\terror\n");
    let find = |name: &str, regime: &str| -> Option<&CellOutcome> {
        out.cells
            .iter()
            .find(|c| c.spec_name == name && c.regime == regime)
    };
    let names: Vec<&String> = {
        let mut seen = Vec::new();
        for c in &out.cells {
            if !seen.contains(&&c.spec_name) {
                seen.push(&c.spec_name);
            }
        }
        seen
    };
    for name in names {
        let kd = find(name, "kd_only");
        let hard = find(name, "hard");
        let (Some(kd), Some(hard)) = (kd, hard) else {
            continue;
        };
        match (&kd.test, &hard.test) {
            (Some(k), Some(h)) => s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t\n",
                name,
                kd.layers,
                kd.d_h,
                fmt_pct(k.roc_auc),
                fmt_pct(h.roc_auc),
                kd.trainable_params,
                k.roc_auc,
                h.roc_auc
            )),
            _ => {
                let err = kd
                    .error
                    .clone()
                    .or_else(|| hard.error.clone())
                    .unwrap_or_default();
                s.push_str(&format!(
                    "{}\t{}\t{}\t-\t-\t{}\t-\t-\t{}\n",
                    name, kd.layers, kd.d_h, kd.trainable_params, err
                ));
            }
        }
    }
    s
}

pub const SWEEP_SPECS: [&str; 3] = ["bilstm-3x128", "bert-student-3x128", "bertbilstm-3x128"];
pub const SWEEP_MULTIPLIERS: [usize; 5] = [0, 1, 2, 4, 8];

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub spec_name: String,
    pub multiplier: usize,
    pub train_examples: usize,
    pub student_test_auc: f64,
    pub teacher_test_auc: f64,
    /// `100 * (teacher - student) / teacher`; positive when the student
    /// trails the teacher.
    pub relative_error_pct: f64,
}

/// Distill each three-layer spec at each augmentation multiplier and
/// report test ROC AUC relative error against the teacher.
pub fn run_augmentation_sweep(
    bundle: &DataBundle,
    teacher: &Model<Verif>,
    multipliers: &[usize],
    out_dir: &Path,
    settings: &GridSettings,
) -> Result<Vec<SweepPoint>> {
    fs::create_dir_all(out_dir)?;
    let dev_data = prepare::<Verif>(&bundle.split.dev, &bundle.vocab)?;
    let test_data = prepare::<Verif>(&bundle.split.test, &bundle.vocab)?;
    let teacher_auc = evaluate(teacher, &test_data)?.roc_auc;
    let (soft_train, _) = label_with_teacher(&bundle.split.train, teacher, &bundle.vocab)?;

    let mut points = Vec::new();
    for &mult in multipliers {
        let augmented = build_augmented(bundle, teacher, &settings.aug, mult, settings.seed)?;
        let mut examples = soft_train.clone();
        examples.extend(augmented);
        let train_data = prepare::<Verif>(&examples, &bundle.vocab)?;

        let mult_points: Vec<SweepPoint> = SWEEP_SPECS
            .par_iter()
            .map(|name| -> Result<SweepPoint> {
                let spec = ModelSpec::named(name, bundle.vocab.len(), settings.embed_dim)?;
                let mut config = settings.train.clone();
                if config.loss_mode == LossMode::HardCe {
                    config.loss_mode = LossMode::KdMse;
                }
                let sweep =
                    distill_cell(teacher, spec, &bundle.vocab, &train_data, &dev_data, &config)?;
                let student_auc = evaluate(&sweep.best.model, &test_data)?.roc_auc;
                Ok(SweepPoint {
                    spec_name: name.to_string(),
                    multiplier: mult,
                    train_examples: train_data.len(),
                    student_test_auc: student_auc,
                    teacher_test_auc: teacher_auc,
                    relative_error_pct: 100.0 * (teacher_auc - student_auc) / teacher_auc,
                })
            })
            .collect::<Result<_>>()?;
        points.extend(mult_points);
    }
    fs::write(out_dir.join("augmentation_curve.tsv"), sweep_tsv(&points))?;
    Ok(points)
}

pub fn sweep_tsv(points: &[SweepPoint]) -> String {
    let mut s = String::from(
        "spec\tmultiplier\ttrain_examples\tstudent_test_auc\tteacher_test_auc\trelative_error_pct\n",
    );
    for p in points {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            p.spec_name,
            p.multiplier,
            p.train_examples,
            p.student_test_auc,
            p.teacher_test_auc,
            p.relative_error_pct
        ));
    }
    s
}
