use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "\
world.days=75
world.step_minutes=60
test_start=2021-03-01
windows=2,1
seeds=1
scenarios=WB
learners=lr
strategies=residual
ffnn.hidden=6
ffnn.max_epochs=3
explain.samples=3
explain.background=4
explain.permutations=2
";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridtherm"))
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.txt"), CONFIG).unwrap();
    ok(dir.path(), &["--config", "cfg.txt", "--out-dir", "world", "synth"]);
    dir
}

#[test]
fn pipeline_produces_documented_outputs() {
    let dir = setup();
    let p = dir.path();
    for f in ["data.csv", "schema.txt", "network.json", "truth.json"] {
        assert!(p.join("world").join(f).exists(), "{f}");
    }
    fn cmd<'a>(out: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
        [&["--config", "cfg.txt", "--out-dir", out][..], rest].concat()
    }
    ok(p, &cmd("sim", &["simulate", "--data", "world/data.csv", "--tier", "archetype"]));
    let sim = std::fs::read_to_string(p.join("sim/simulation.csv")).unwrap();
    assert!(sim.starts_with("timestamp,sim_R1"));

    ok(p, &cmd("model", &["train", "--data", "world/data.csv", "--scenario", "WB", "--strategy", "residual", "--learner", "lr"]));
    assert!(p.join("model/bundle/manifest.json").exists());
    ok(p, &cmd("score", &["evaluate", "--data", "world/data.csv", "--bundle", "model/bundle"]));
    let metrics = std::fs::read_to_string(p.join("score/metrics.csv")).unwrap();
    assert!(metrics.starts_with("scenario,strategy,learner,seed,window_months,train_rows,mae,mape_pct,rmse,std_ratio"));
    assert!(metrics.lines().nth(1).unwrap().starts_with("WB,residual,lr,1,all,"));

    ok(p, &cmd("why", &["explain", "--data", "world/data.csv", "--bundle", "model/bundle"]));
    let table = std::fs::read_to_string(p.join("why/rank_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5);

    ok(p, &cmd("sweep", &["sweep", "--data", "world/data.csv"]));
    let sweep = std::fs::read_to_string(p.join("sweep/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);
}

#[test]
fn matrix_is_reproducible_and_seed_flag_applies() {
    let dir = setup();
    let p = dir.path();
    for out in ["a", "b"] {
        ok(p, &["--config", "cfg.txt", "--seed", "7", "--out-dir", out, "evaluate", "--data", "world/data.csv"]);
    }
    let a = std::fs::read(p.join("a/metrics.csv")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b/metrics.csv")).unwrap());
    assert!(String::from_utf8(a).unwrap().lines().nth(1).unwrap().starts_with("WB,physics,-,7,"));
    assert!(p.join("a/boxplot_summary.csv").exists());
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = setup();
    let p = dir.path();
    let code = |args: &[&str]| run(p, args).status.code();
    assert_eq!(code(&["--config", "missing.txt", "synth"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["--config", "cfg.txt", "train", "--data", "world/data.csv", "--learner", "svm"]), Some(2));
    assert_eq!(code(&["--config", "cfg.txt", "evaluate", "--data", "nowhere.csv"]), Some(2));
    std::fs::write(p.join("bad.txt"), "bogus=1\n").unwrap();
    assert_eq!(code(&["--config", "bad.txt", "synth"]), Some(2));
}

#[test]
fn runtime_failures_exit_with_three() {
    let dir = setup();
    let p = dir.path();
    // A regular file where the output directory should go.
    std::fs::write(p.join("blocked"), "").unwrap();
    let out = run(p, &["--config", "cfg.txt", "--out-dir", "blocked/sub", "synth"]);
    assert_eq!(out.status.code(), Some(3));
}
