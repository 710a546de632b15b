use std::path::Path;
use std::process::{Command, Output};

use coreset_influence::harness::RunReport;

const CONFIG: &str = "\
seed=1
stream.num_tasks=3
stream.samples_per_class=30
criterion.m=20
";

fn coreset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coreset")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CONFIG);
    let out = dir.path().join("out");
    let o = coreset(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["report.json", "acc_matrix.csv", "metrics.csv", "buffer_trace.csv"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.acc_matrix.num_tasks(), 3);
    let acc = std::fs::read_to_string(out.join("acc_matrix.csv")).unwrap();
    assert_eq!(acc.lines().next(), Some("after_task,task_0,task_1,task_2"));
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some("step,task,tau,buffer_size"));
    assert_eq!(metrics.lines().count(), report.metrics.len() + 1);
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CONFIG);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = coreset(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let out = dir.path().join("c");
    coreset(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "8"]);
    assert_ne!(std::fs::read(out.join("report.json")).unwrap(), reports[0]);
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let bad_mu = write(dir.path(), "mu.cfg", &format!("{CONFIG}criterion.mu=1.5\n"));
    let o = coreset(&["run", "--config", &bad_mu, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("criterion.mu"), "{}", stderr(&o));

    let unknown = write(dir.path(), "unknown.cfg", &format!("{CONFIG}criterion.lambda=1\n"));
    let o = coreset(&["run", "--config", &unknown, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("criterion.lambda"), "{}", stderr(&o));

    let missing_csv = write(dir.path(), "csv.cfg", "stream.source=csv\nstream.train_csv=/no/such/train.csv\n");
    let o = coreset(&["run", "--config", &missing_csv, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stream.train_csv"), "{}", stderr(&o));

    let o = coreset(&["run", "--config", "/no/such/config.cfg", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write(dir.path(), "ok.cfg", CONFIG);
    let o = coreset(&["run", "--config", &cfg, "--out", out, "--set", "criterion.nu=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("criterion.nu"), "{}", stderr(&o));

    assert_eq!(coreset(&["run"]).status.code(), Some(2));
    assert_eq!(coreset(&["launch"]).status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CONFIG);
    let grid = write(dir.path(), "grid.txt", "criterion.nu=0,0.001,0.01,0.1\n");
    let out = dir.path().join("sweep");
    let o = coreset(&["sweep", "--config", &cfg, "--grid", &grid, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["mu", "nu", "acc", "bwt", "mean_tau"]);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);

    let vanilla = dir.path().join("vanilla");
    let o = coreset(&[
        "run", "--config", &cfg, "--out", vanilla.to_str().unwrap(), "--set", "selector=vanilla_if",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(vanilla.join("report.json")).unwrap()).unwrap();
    let nu_zero = rows.iter().find(|row| row[1].parse::<f64>().unwrap() == 0.0).unwrap();
    assert_eq!(nu_zero[2].parse::<f64>().unwrap(), report.acc);

    let big = write(dir.path(), "big.txt", &format!("criterion.mu={}\ncriterion.nu=0,1\n", vec!["0.5"; 51].join(",")));
    let o = coreset(&["sweep", "--config", &cfg, "--grid", &big, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn select_prints_budget_ids() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("id,task,label,f0,f1\n");
    for i in 0..30 {
        let y = i % 2;
        let x = if y == 0 { -1.0 } else { 1.0 } + (i as f64 * 0.37).sin();
        text.push_str(&format!("{i},0,{y},{x},{}\n", (i as f64 * 1.3).cos()));
    }
    let data = write(dir.path(), "data.csv", &text);
    let o = coreset(&["select", "--data", &data, "--m", "8", "--mu", "0.5", "--nu", "0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ids: Vec<u64> = String::from_utf8(o.stdout).unwrap().split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert_eq!(ids.len(), 8);
    assert!(ids.iter().all(|&id| id < 30));
    let o = coreset(&["select", "--data", &data, "--m", "8", "--mu", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_filter_and_mutation() {
    let o = coreset(&["validate", "--filter", "neumann"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));

    let o = coreset(&["validate", "--filter", "second_order", "--mutate", "joint-sign"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("second_order.joint"));

    assert_eq!(coreset(&["validate", "--filter", "nothing-matches"]).status.code(), Some(2));
}
