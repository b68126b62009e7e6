//! End-to-end tests of the `relu-spectra` binary: the full pipeline, its
//! file outputs, exit codes, and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relu-spectra"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("experiment.cfg");
    fs::write(
        &path,
        "\
# pipeline smoke configuration
dataset = blobs
blobs_classes = 3
blobs_dim = 4
blobs_per_class = 60
blobs_separation = 1.0
seed = 11

hidden = 6,6
activation = relu
init = glorot

batch_size = 16
steps = 60
learning_rate = 0.005
checkpoint_every = 30

subset_size = 12
num_g = 25
rsv_steps = 40

retrain_batches = 3
retrain_batch_size = 32
stop = max_iters:3

report_input = metrics.csv
report_output = metrics.svg
report_series = loss,train_acc
",
    )
    .unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_pipeline(config: &Path, out_dir: &Path) {
    for sub in ["train", "rsv", "gmw", "prune", "report"] {
        run_ok(bin()
            .arg(sub)
            .arg("--config")
            .arg(config)
            .arg("--out")
            .arg(out_dir));
    }
}

#[test]
fn full_pipeline_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    run_pipeline(&config, &out);

    for name in [
        "checkpoint_step_00000000.json",
        "checkpoint_step_00000030.json",
        "checkpoint_step_00000060.json",
        "metrics.csv",
        "rsv_layer0_correct.csv",
        "rsv_layer0_incorrect.csv",
        "rsv_layer1_correct.csv",
        "rsv_layer1_incorrect.csv",
        "gmw_trace.csv",
        "pruned_model.json",
        "prune_history.csv",
        "metrics.svg",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }

    // Every CSV parses with a header row.
    for entry in fs::read_dir(&out).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let text = fs::read_to_string(&path).unwrap();
            let mut lines = text.lines();
            let header = lines.next().unwrap();
            assert!(header.contains(','), "{path:?} header: {header}");
            assert!(lines.count() >= 1, "{path:?} has no data rows");
        }
    }

    // The metrics CSV has one row per checkpoint.
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4); // header + 3 checkpoints
    assert!(metrics.starts_with("step,loss,train_acc,test_acc\n"));

    // gmw trace covers (3 checkpoints) x (input + 2 layers) x (2 subsets).
    let trace = fs::read_to_string(out.join("gmw_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 3 * 3 * 2);
}

#[test]
fn pipeline_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_pipeline(&config, &out_a);
    run_pipeline(&config, &out_b);

    let mut names: Vec<String> = fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let a = fs::read(out_a.join(&name)).unwrap();
        let b = fs::read(out_b.join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_ok(bin().arg("train").arg("--config").arg(&config).arg("--out").arg(&out_a));
    run_ok(bin()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_b)
        .arg("--seed")
        .arg("999"));
    let a = fs::read(out_a.join("checkpoint_step_00000060.json")).unwrap();
    let b = fs::read(out_b.join("checkpoint_step_00000060.json")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn usage_errors_exit_1() {
    // Missing --config.
    let out = bin().arg("train").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Unknown subcommand.
    let out = bin().arg("explode").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Unknown config key.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "not_a_key = 1\n").unwrap();
    let out = bin().arg("train").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("missing.cfg");
    fs::write(
        &cfg,
        "dataset = csv\ncsv_path = /nonexistent/file.csv\nstandardize = false\n",
    )
    .unwrap();
    let out = bin()
        .arg("train")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn report_window_smooths_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("wiggle.csv"), "x,y\n0,0\n1,10\n2,0\n3,10\n4,0\n").unwrap();
    let cfg = dir.path().join("report.cfg");
    fs::write(
        &cfg,
        "report_input = wiggle.csv\nreport_output = raw.svg\n",
    )
    .unwrap();
    run_ok(bin().arg("report").arg("--config").arg(&cfg).arg("--out").arg(&out));
    let cfg2 = dir.path().join("report2.cfg");
    fs::write(
        &cfg2,
        "report_input = wiggle.csv\nreport_output = smooth.svg\nreport_window = 3\n",
    )
    .unwrap();
    run_ok(bin().arg("report").arg("--config").arg(&cfg2).arg("--out").arg(&out));
    let raw = fs::read_to_string(out.join("raw.svg")).unwrap();
    let smooth = fs::read_to_string(out.join("smooth.svg")).unwrap();
    assert_ne!(raw, smooth);
    assert_eq!(raw.matches("<polyline").count(), 1);
    assert_eq!(smooth.matches("<polyline").count(), 1);
}
