//! Binary-level tests: exit codes, output formats and a miniature
//! end-to-end pipeline.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qtr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qtr"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = qtr().args(args).output().expect("spawn qtr");
    assert!(
        out.status.success(),
        "qtr {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn unknown_subcommand_exits_two_with_usage() {
    let out = qtr().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("usage"), "stderr: {err}");
}

#[test]
fn unknown_flag_exits_two() {
    let out = qtr().args(["params", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_is_a_one_line_failure() {
    let out = qtr()
        .args(["eval", "--ckpt", "/nonexistent.ckpt", "--data", "/nonexistent.tsv", "--vocab", "/nonexistent.txt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.lines().count() <= 2, "stderr: {err}");
    assert!(err.starts_with("error:"), "stderr: {err}");
}

#[test]
fn params_reports_published_scale_counts() {
    let out = run_ok(&["params", "--spec", "bertbilstm-3x128"]);
    let text = stdout_of(&out);
    // 0.95M trainable under the documented convention; table rounds to 1.0M
    assert!(text.contains("trainable=954370"), "output: {text}");
    assert!(text.contains("(0.95M)"), "output: {text}");
    assert!(text.contains("frozen=38400000"), "output: {text}");

    let out = run_ok(&["params", "--spec", "bert-student-1x128"]);
    let text = stdout_of(&out);
    assert!(text.contains("trainable=280578"), "output: {text}");
}

#[test]
fn gen_data_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let args = |out: &Path, seed: &str| {
        vec![
            "gen-data".to_string(),
            "--out".into(),
            out.display().to_string(),
            "--seed".into(),
            seed.into(),
            "--train-size".into(),
            "300".into(),
            "--dev-size".into(),
            "80".into(),
            "--test-size".into(),
            "80".into(),
        ]
    };
    for (path, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let argv: Vec<String> = args(path, seed);
        let argv: Vec<&str> = argv.iter().map(|s| s.as_str()).collect();
        run_ok(&argv);
    }
    for file in ["vocab.txt", "train.tsv", "dev.tsv", "test.tsv", "gen.resolved.cfg"] {
        let fa = std::fs::read(a.join(file)).unwrap();
        let fb = std::fs::read(b.join(file)).unwrap();
        assert_eq!(fa, fb, "{file} differs between identical runs");
    }
    assert_ne!(
        std::fs::read(a.join("train.tsv")).unwrap(),
        std::fs::read(c.join("train.tsv")).unwrap(),
        "different seeds must differ"
    );
}

#[test]
fn gen_data_rejects_infeasible_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = qtr()
        .args([
            "gen-data",
            "--out",
            dir.path().to_str().unwrap(),
            "--positive-rate",
            "0.95",
            "--noise-rate",
            "0.4",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));
}

/// gen-data -> train-teacher -> augment -> label -> distill -> train ->
/// eval -> bench, all at miniature scale.
#[test]
fn miniature_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let teacher_dir = dir.path().join("teacher");
    let student_dir = dir.path().join("student");
    let hard_dir = dir.path().join("hard");
    let data_s = data.display().to_string();

    run_ok(&[
        "gen-data", "--out", &data_s, "--seed", "3",
        "--train-size", "200", "--dev-size", "60", "--test-size", "60",
    ]);

    run_ok(&[
        "train-teacher", "--data", &data_s,
        "--out", teacher_dir.to_str().unwrap(),
        "--seed", "5", "--spec", "bert-student-1x16", "--embed-dim", "16",
        "--lr-set", "1e-3", "--batch-size", "32", "--max-epochs", "2", "--patience", "2",
    ]);
    let teacher_ckpt = teacher_dir.join("teacher.ckpt");
    assert!(teacher_ckpt.is_file());
    assert!(teacher_dir.join("report.tsv").is_file());
    assert!(teacher_dir.join("run.resolved.cfg").is_file());
    assert!(teacher_dir.join("sweep.tsv").is_file());

    let aug_file = dir.path().join("aug.tsv");
    run_ok(&[
        "augment", "--data", &data_s, "--out", aug_file.to_str().unwrap(),
        "--mult", "1", "--seed", "9",
    ]);
    let aug_text = std::fs::read_to_string(&aug_file).unwrap();
    assert!(aug_text.lines().count() > 100, "augmentation produced lines");
    assert!(aug_text.lines().all(|l| l.split('\t').count() == 2), "unlabeled format");

    let labeled_file = dir.path().join("aug_labeled.tsv");
    run_ok(&[
        "label", "--ckpt", teacher_ckpt.to_str().unwrap(),
        "--data", aug_file.to_str().unwrap(),
        "--vocab", data.join("vocab.txt").to_str().unwrap(),
        "--out", labeled_file.to_str().unwrap(),
    ]);
    let labeled_text = std::fs::read_to_string(&labeled_file).unwrap();
    assert!(labeled_text.lines().all(|l| l.split('\t').count() == 5), "soft-labeled format");
    assert!(labeled_text.lines().all(|l| l.split('\t').nth(2) == Some("-")), "no hard labels");

    run_ok(&[
        "distill", "--data", &data_s, "--ckpt", teacher_ckpt.to_str().unwrap(),
        "--out", student_dir.to_str().unwrap(), "--seed", "5",
        "--spec", "bilstm-1x16", "--aug", labeled_file.to_str().unwrap(),
        "--lr-set", "1e-3", "--batch-size", "32", "--max-epochs", "1", "--patience", "1",
    ]);
    let student_ckpt = student_dir.join("model.ckpt");
    assert!(student_ckpt.is_file());

    run_ok(&[
        "train", "--data", &data_s, "--ckpt", teacher_ckpt.to_str().unwrap(),
        "--out", hard_dir.to_str().unwrap(), "--seed", "5",
        "--spec", "bilstm-1x16",
        "--lr-set", "1e-3", "--batch-size", "32", "--max-epochs", "1", "--patience", "1",
    ]);

    let out = run_ok(&[
        "eval", "--ckpt", student_ckpt.to_str().unwrap(),
        "--data", data.join("test.tsv").to_str().unwrap(),
        "--vocab", data.join("vocab.txt").to_str().unwrap(),
    ]);
    let text = stdout_of(&out);
    let record = text.lines().last().unwrap();
    assert!(record.starts_with("model=bilstm-1x16"), "record: {record}");
    for field in ["roc_auc=", "avg_prec=", "ce=", "roc_auc_raw=", "avg_prec_raw=", "ce_raw="] {
        assert!(record.contains(field), "missing {field} in {record}");
    }
    // presentation fields carry exactly four decimals
    let auc_field = record
        .split('\t')
        .find(|f| f.starts_with("roc_auc="))
        .unwrap();
    let decimals = auc_field.split('.').nth(1).unwrap();
    assert_eq!(decimals.len(), 4, "field: {auc_field}");

    let bench_out = dir.path().join("latency.tsv");
    let out = run_ok(&[
        "bench", "--ckpt", student_ckpt.to_str().unwrap(),
        "--iters", "100", "--warmup", "10",
        "--out", bench_out.to_str().unwrap(),
    ]);
    let text = stdout_of(&out);
    assert!(text.contains("mean_ms"), "bench header present");
    assert!(text.contains("bilstm-1x16\t22\t1\t100\t10\tf32"), "bench row: {text}");
    assert!(bench_out.is_file());

    // resolved configs everywhere
    for dir in [&teacher_dir, &student_dir, &hard_dir] {
        assert!(dir.join("run.resolved.cfg").is_file());
    }
}

#[test]
fn train_twice_same_seed_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let data_s = data.display().to_string();
    run_ok(&[
        "gen-data", "--out", &data_s, "--seed", "4",
        "--train-size", "150", "--dev-size", "60", "--test-size", "50",
    ]);
    let mk = |name: &str| -> PathBuf {
        let out = dir.path().join(name);
        run_ok(&[
            "train-teacher", "--data", &data_s, "--out", out.to_str().unwrap(),
            "--seed", "6", "--spec", "bert-student-1x16", "--embed-dim", "16",
            "--lr-set", "1e-3", "--batch-size", "32", "--max-epochs", "2", "--patience", "2",
        ]);
        out
    };
    let a = mk("t1");
    let b = mk("t2");
    assert_eq!(
        std::fs::read(a.join("teacher.ckpt")).unwrap(),
        std::fs::read(b.join("teacher.ckpt")).unwrap(),
        "checkpoints must be byte-identical"
    );
    assert_eq!(
        std::fs::read(a.join("report.tsv")).unwrap(),
        std::fs::read(b.join("report.tsv")).unwrap()
    );
}
