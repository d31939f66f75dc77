use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chanpred::occupancy::OccupancyModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chanpred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chanpred"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = chanpred(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

const SMALL_INTEGRATED: [&str; 8] = [
    "--nodes",
    "80",
    "--graphs",
    "2",
    "--observers",
    "2",
    "--slots",
    "120",
];

#[test]
fn one_graph_one_observer_gives_one_trace_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let manifest = ok(&[
        "gen",
        "--out",
        path(&out),
        "--graphs",
        "1",
        "--observers",
        "1",
    ]);
    assert_eq!(manifest.lines().count(), 2, "{manifest}");
    let files: Vec<_> = fs::read_dir(out.join("traces"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(files.len(), 2, "{files:?}");
    assert!(out.join("traces/g000_o0.csv").exists());
    assert!(out.join("traces/g000_o0.meta").exists());
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let mut args = vec!["gen", "--out", path(d), "--seed", "5"];
        args.extend(SMALL_INTEGRATED);
        ok(&args);
    }
    for name in [
        "manifest.csv",
        "traces/g000_o0.csv",
        "traces/g000_o1.meta",
        "traces/g001_o1.csv",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let c = dir.path().join("c");
    let mut args = vec!["gen", "--out", path(&c), "--seed", "6"];
    args.extend(SMALL_INTEGRATED);
    ok(&args);
    assert_ne!(
        read(&a.join("traces/g000_o0.csv")),
        read(&c.join("traces/g000_o0.csv"))
    );
}

#[test]
fn pipeline_is_reproducible_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let mut args = vec![
            "gen",
            "--out",
            path(&out),
            "--epochs-power",
            "40",
            "--epochs-occupancy",
            "20",
        ];
        args.extend(SMALL_INTEGRATED);
        ok(&args);
        ok(&["train", "--phase", "1", "--out", path(&out)]);
        ok(&["train", "--phase", "2", "--out", path(&out)]);
        let written = ok(&["eval", "--out", path(&out), "--workers", "2"]);
        assert!(written.contains("integrated_accuracy.csv"));
        assert_eq!(read(&out.join("phase1_loss.csv")).lines().count(), 21);
        assert_eq!(read(&out.join("phase2_loss.csv")).lines().count(), 41);
        tables.push((
            read(&out.join("integrated_accuracy.csv")),
            read(&out.join("datasets.csv")),
        ));
    }
    assert_eq!(tables[0], tables[1]);
    let (table, datasets) = &tables[0];
    assert!(table.starts_with(
        "aggregation,mobility,bounded,accuracy,fp,fn,accuracy_corrected,fp_correction,fn_correction,correction_error\n"
    ));
    assert_eq!(table.lines().count(), 3);
    // Two graphs with two observers each, one of them trains.
    assert_eq!(datasets.lines().count(), 4);

    let report = ok(&[
        "report",
        path(&dir.path().join("a")),
        path(&dir.path().join("b")),
    ]);
    assert!(report.contains("integrated_accuracy.csv"));
    assert_eq!(report.lines().filter(|l| l.contains(" bits ")).count(), 2);
}

#[test]
fn empty_test_split_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "gen",
        "--out",
        path(&out),
        "--graphs",
        "1",
        "--observers",
        "1",
        "--nodes",
        "80",
    ]);
    ok(&[
        "train",
        "--phase",
        "1",
        "--out",
        path(&out),
        "--epochs-occupancy",
        "2",
    ]);
    ok(&[
        "train",
        "--phase",
        "2",
        "--out",
        path(&out),
        "--epochs-power",
        "2",
    ]);
    ok(&["eval", "--out", path(&out)]);
    let datasets = read(&out.join("datasets.csv"));
    assert_eq!(datasets.lines().count(), 1, "{datasets}");
    assert!(datasets.starts_with("path,graph,observer,bits,"));
}

#[test]
fn zero_epochs_store_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "gen",
        "--experiment",
        "occupancy",
        "--out",
        path(&out),
        "--train-samples",
        "3",
        "--test-samples",
        "0",
        "--seed",
        "11",
    ]);
    ok(&[
        "train",
        "--phase",
        "1",
        "--out",
        path(&out),
        "--epochs-occupancy",
        "0",
    ]);
    let trained = OccupancyModel::load(&out.join("phase1.ckpt")).unwrap();
    let fresh = OccupancyModel::new(16, 40, 40, &mut ChaCha8Rng::seed_from_u64(11));
    assert_eq!(trained, fresh);
    assert_eq!(read(&out.join("phase1_loss.csv")), "epoch,loss\n");
}

#[test]
fn occupancy_run_reports_both_period_splits_and_a_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "gen",
        "--experiment",
        "occupancy",
        "--out",
        path(&out),
        "--train-samples",
        "60",
        "--test-samples",
        "20",
    ]);
    ok(&["train", "--phase", "1", "--out", path(&out)]);
    ok(&["eval", "--out", path(&out)]);
    let table = read(&out.join("occupancy_accuracy.csv"));
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,train_accuracy,seen_accuracy,unseen_accuracy,no_period_windows"
    );
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .skip(1)
        .take(3)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(row.iter().all(|&a| a > 0.95), "{table}");

    let heat = read(&out.join("heatmap.csv"));
    let rows: Vec<Vec<f64>> = heat
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.len() == 20));
    // Rows past the first period put most of their weight on lags that are
    // multiples of 7.
    let mut ridge = 0.0;
    for (r, row) in rows.iter().enumerate().skip(7) {
        ridge += (0..r)
            .filter(|c| (r - c) % 7 == 0)
            .map(|c| row[c])
            .sum::<f64>();
    }
    assert!(ridge / 13.0 > 0.5, "mean lag-7 mass {}", ridge / 13.0);
}

#[test]
fn power_run_writes_table_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "gen",
        "--experiment",
        "power",
        "--out",
        path(&out),
        "--train-graphs",
        "2",
        "--graphs",
        "1",
    ]);
    ok(&[
        "train",
        "--phase",
        "2",
        "--out",
        path(&out),
        "--epochs-power",
        "30",
    ]);
    ok(&["eval", "--out", path(&out)]);
    let table = read(&out.join("power_accuracy.csv"));
    assert!(table.starts_with("mobility,bounded,train_accuracy,test_accuracy,"));
    let traj = read(&out.join("trajectories.csv"));
    assert!(traj.starts_with("graph,transmitter,slot,true_dbm,predicted_dbm,theta\n"));
    assert!(traj.lines().count() > 1);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("exp.conf");
    let out = dir.path().join("run");
    fs::write(
        &conf,
        format!(
            "# small run\nout = {}\ngraphs = 3\nobservers = 1\nnodes = 80\n",
            path(&out)
        ),
    )
    .unwrap();
    let manifest = ok(&["gen", "--config", path(&conf), "--graphs", "2"]);
    assert_eq!(manifest.lines().count(), 3);
    let stored = read(&out.join("experiment.conf"));
    assert!(
        stored.contains("graphs = 2\n") && stored.contains("nodes = 80\n"),
        "{stored}"
    );
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    let res = chanpred(&["gen", "--out", path(&out), "--channels", "0"]);
    assert!(!res.status.success());
    let err = String::from_utf8(res.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    assert!(!out.exists(), "invalid config must not write anything");

    let res = chanpred(&["train", "--phase", "1", "--out", path(&out)]);
    assert!(!res.status.success());
    assert!(String::from_utf8(res.stderr)
        .unwrap()
        .contains("manifest.csv is missing"));

    let res = chanpred(&["gen", "--out", path(&out), "--mobility", "teleport"]);
    assert!(!res.status.success());
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "gen",
        "--experiment",
        "occupancy",
        "--out",
        path(&out),
        "--train-samples",
        "4",
        "--test-samples",
        "2",
    ]);
    ok(&[
        "train",
        "--phase",
        "1",
        "--out",
        path(&out),
        "--epochs-occupancy",
        "1",
    ]);
    let res = chanpred(&["eval", "--out", path(&out), "--horizon", "20"]);
    assert!(!res.status.success());
    let err = String::from_utf8(res.stderr).unwrap();
    assert!(err.contains("horizon 40") && err.contains("20"), "{err}");
}
