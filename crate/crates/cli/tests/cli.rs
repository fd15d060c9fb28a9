use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn adapshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adapshare"))
        .args(args)
        .env_remove("ADAPSHARE_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = adapshare(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_is_seeded_and_env_seed_applies() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    let reference = fixture("demand_hourly.csv");
    let stdout = ok(&["synth", "--ref", p(&reference), "--len", "200", "--seed", "9", "--out", p(&a)]);
    assert!(stdout.contains("KS distance"));
    ok(&["synth", "--ref", p(&reference), "--len", "200", "--seed", "9", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let status = Command::new(env!("CARGO_BIN_EXE_adapshare"))
        .args(["synth", "--ref", p(&reference), "--len", "200", "--out", p(&c)])
        .env("ADAPSHARE_SEED", "9")
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn train_then_eval_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("agent.json");
    let curve = dir.path().join("curve.csv");
    let data = fixture("demand_hourly.csv");
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "train_steps = 50\n[agent]\nwarmup_steps = 10\nbatch_size = 8\nhidden = [8]\n").unwrap();
    let stdout = ok(&[
        "train", "--data", p(&data), "--config", p(&cfg), "--agent", "ddpg", "--n-r", "60", "--steps", "80", "--checkpoint", p(&ck), "--curve", p(&curve),
    ]);
    assert!(stdout.contains("ddpg"));
    // The flag overrides the file.
    assert_eq!(std::fs::read_to_string(&curve).unwrap().lines().count(), 81);

    let out_dir = dir.path().join("eval");
    let stdout = ok(&["eval", "--data", p(&data), "--checkpoint", p(&ck), "--out", p(&out_dir)]);
    assert!(stdout.contains("n_r=60"));
    assert!(out_dir.join("sweep.csv").exists());
    assert!(out_dir.join("detail_ddpg_nr60_z0.5.csv").exists());
}

#[test]
fn solver_sweep_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let data = fixture("demand_hourly.csv");
    ok(&["sweep", "--data", p(&data), "--agents", "opt_oracle,opt_base", "--n-r", "20,100", "--zeta", "0.2,0.8", "--out", p(&out)]);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(out.join("surplus_nr20.svg").exists() && out.join("fairness_nr100.svg").exists());

    let charts = dir.path().join("charts");
    let stdout = ok(&["plot", "--sweep", p(&out.join("sweep.csv")), "--out", p(&charts)]);
    assert_eq!(stdout.lines().count(), 4);
    assert_eq!(std::fs::read(charts.join("surplus_nr20.svg")).unwrap(), std::fs::read(out.join("surplus_nr20.svg")).unwrap());
}

#[test]
fn errors_are_reported() {
    let out = adapshare(&["sweep", "--data", "/nonexistent.csv", "--out", "/tmp/never"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dataset missing"));

    let out = adapshare(&["eval", "--data", p(&fixture("demand_hourly.csv")), "--agent", "td3"]);
    assert!(!out.status.success());

    let out = adapshare(&["sweep", "--data", p(&fixture("demand_hourly.csv")), "--zeta", "1.5", "--agents", "opt_oracle", "--out", "/tmp/never"]);
    assert!(!out.status.success());
}

#[test]
fn ingest_merges_two_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("series.csv");
    let log = fixture("dci_small.csv");
    ok(&["ingest", "--dci-a", p(&log), "--dci-b", p(&log), "--out", p(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "timestamp,d_a,d_b");
    assert_eq!(rows[1], "1674000000,18.75,18.75");
    assert_eq!(rows[2], "1674003600,21,21");
}
