//! End-to-end tests of the `manigap` binary: exit codes, error prefixes,
//! report files, and byte-level determinism of re-runs.

use std::fs;
use std::path::Path;
use std::process::Output;

fn manigap(dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_manigap"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary spawns")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("reading {rel}: {e}"))
}

/// Everything after the timestamp comment on the first line.
fn manifest_body(text: &str) -> &str {
    text.split_once('\n').expect("manifest has lines").1
}

const NODE_CFG: &str = "sweep.n_values = 16\nsweep.trials = 1\nrun.weight_mode = fixed\n";

#[test]
fn node_gap_reruns_byte_identically_and_flags_the_degenerate_fit() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        fs::write(d.path().join("run.cfg"), NODE_CFG).unwrap();
    }
    let args = ["node-gap", "--config", "run.cfg", "--out", "rep"];
    let out = manigap(d1.path(), &args);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let listed = stdout(&out);
    for name in ["cells.csv", "summary.csv", "manifest.txt"] {
        assert!(listed.contains(name), "stdout misses {name}: {listed}");
    }

    // A single (n, trial) cell: one data row, and the fit footers are
    // flagged degenerate (a slope needs at least three sizes).
    let cells = read(d1.path(), "rep/cells.csv");
    let mut lines = cells.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,trial,empirical_risk,statistical_risk,gap,train_acc,eval_acc,reg_value,flag_overfit"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("16,0,"), "{}", rows[0]);
    let summary = read(d1.path(), "rep/summary.csv");
    for footer in ["\nfit,", "\nfit_unflagged,"] {
        let line = summary
            .lines()
            .find(|l| l.starts_with(&footer[1..]))
            .unwrap_or_else(|| panic!("no {footer} footer in {summary}"));
        assert!(line.ends_with(",0,1"), "fit not flagged degenerate: {line}");
    }

    // The manifest records every key, defaults included, and reparses.
    let manifest = read(d1.path(), "rep/manifest.txt");
    assert!(manifest.starts_with("# emitted at unix time "));
    for key in [
        "manifold.kind = circle",
        "kernel.kind = gaussian",
        "training.lr = 0.005",
        "sweep.eval_n = 4096",
        "run.out = rep",
        "run.seed = 0",
        "run.weight_mode = fixed",
    ] {
        assert!(manifest.contains(key), "manifest misses {key}:\n{manifest}");
    }

    // Identical config in a fresh directory: identical bytes everywhere,
    // with only the manifest timestamp free to differ.
    let out = manigap(d2.path(), &args);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(cells, read(d2.path(), "rep/cells.csv"));
    assert_eq!(summary, read(d2.path(), "rep/summary.csv"));
    let manifest2 = read(d2.path(), "rep/manifest.txt");
    assert_eq!(manifest_body(&manifest), manifest_body(&manifest2));

    // The seed flag reaches the run: a different master seed moves the
    // sampled risks.
    let out = manigap(d1.path(), &["node-gap", "--config", "run.cfg", "--out", "seeded", "--seed", "7"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_ne!(cells, read(d1.path(), "seeded/cells.csv"));
}

#[test]
fn validation_errors_exit_one_with_the_documented_prefix() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.cfg"),
        "kernel.kind = epsilon\nkernel.schedule = off\n",
    )
    .unwrap();
    let out = manigap(dir.path(), &["build-graph", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("ERROR 1: "), "{err}");
    assert!(err.contains("kernel.epsilon"), "{err}");

    fs::write(dir.path().join("typo.cfg"), "kernal.kind = epsilon\n").unwrap();
    let out = manigap(dir.path(), &["build-graph", "--config", "typo.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("ERROR 1: "), "{err}");
    assert!(err.contains("kernel.kind"), "no suggestion in: {err}");
}

#[test]
fn io_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // A plain file where the output directory should go.
    fs::write(dir.path().join("blocker"), "").unwrap();
    fs::write(dir.path().join("run.cfg"), "run.n = 32\n").unwrap();
    let out = manigap(
        dir.path(),
        &["build-graph", "--config", "run.cfg", "--out", "blocker/rep"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("ERROR 2: "), "{}", stderr(&out));

    // Unreadable config file.
    let out = manigap(dir.path(), &["build-graph", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("ERROR 2: "), "{}", stderr(&out));
}

const TETRAHEDRON_OFF: &str = "OFF
4 4 6
0 0 0
1 0 0
0 1 0
0 0 1
3 0 1 2
3 0 1 3
3 0 2 3
3 1 2 3
";

#[test]
fn build_graph_ingests_an_off_mesh() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tet.off"), TETRAHEDRON_OFF).unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "manifold.kind = mesh\nmanifold.mesh_path = tet.off\nrun.n = 40\n",
    )
    .unwrap();
    let out = manigap(
        dir.path(),
        &["build-graph", "--config", "run.cfg", "--out", "rep"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let edges = read(dir.path(), "rep/graph_edges.csv");
    assert!(edges.starts_with("i,j,weight\n"), "{edges}");
    assert!(edges.lines().count() > 1, "no edges written");
    assert!(read(dir.path(), "rep/manifest.txt").contains("manifold.mesh_path = tet.off"));
}

#[test]
fn eig_check_writes_the_convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "sweep.n_values = 32 48\nsweep.trials = 1\nsweep.i_max = 3\n",
    )
    .unwrap();
    let out = manigap(
        dir.path(),
        &["eig-check", "--config", "run.cfg", "--out", "rep"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let table = read(dir.path(), "rep/eig_convergence.csv");
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,i,analytic_ratio,mean_error,excluded_trials"
    );
    // Two sizes × ratios i ∈ {2, 3}.
    assert_eq!(lines.count(), 4);
}

#[test]
fn graph_gap_emits_gap_and_readout_reports() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "sweep.n_values = 12 16\nsweep.trials = 1\nsweep.eval_n = 32\ntraining.epochs = 2\ntraining.batch_size = 2\n",
    )
    .unwrap();
    let out = manigap(
        dir.path(),
        &["graph-gap", "--config", "run.cfg", "--out", "rep"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(read(dir.path(), "rep/cells.csv").starts_with("n,trial,"));
    assert!(read(dir.path(), "rep/summary.csv").starts_with("n,gap_mean,gap_std\n"));
    let readouts = read(dir.path(), "rep/readouts.csv");
    assert!(readouts.starts_with("n,trial,readout_diff\n"), "{readouts}");
    assert_eq!(readouts.lines().count(), 3);
    assert!(read(dir.path(), "rep/readout_summary.csv").starts_with("n,readout_mean,readout_std\n"));
}

#[test]
fn reg_sweep_emits_one_report_pair_per_mu() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "sweep.n_values = 16\nsweep.trials = 1\nsweep.mu_values = 0 0.01\ntraining.epochs = 1\n",
    )
    .unwrap();
    let out = manigap(
        dir.path(),
        &["reg-sweep", "--config", "run.cfg", "--out", "rep"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(read(dir.path(), "rep/reg_index.csv"), "index,mu\n0,0\n1,0.01\n");
    for name in ["cells_mu0.csv", "summary_mu0.csv", "cells_mu1.csv", "summary_mu1.csv"] {
        assert!(dir.path().join("rep").join(name).exists(), "missing {name}");
    }
}

#[test]
fn help_exits_zero_and_missing_subcommand_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = manigap(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let usage = stdout(&out);
    assert!(usage.contains("node-gap"), "{usage}");

    let out = manigap(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("ERROR 1: "), "{}", stderr(&out));
}
