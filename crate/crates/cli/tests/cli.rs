use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_absadmm"))
}

fn write_config(dir: &Path, scale: &str, beta: &str) -> std::path::PathBuf {
    let text = format!(
        r#"
[dataset]
kind = "synthetic"
[dataset.spec]
n = 60
[dataset.spec.features]
kind = "gaussian"
d = 4
scale = {scale}

[problem]
kind = "fused_logistic"
l = 0.01

[run]
repeats = 2
max_iters = 20
epsilon = 1e-3
c_eps = 3.0
tau_init = 100.0

[[methods]]
method = "abs-sadmm"
beta = {beta}
eta = 0.5
"#
    );
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("process exited normally")
}

#[test]
fn lists_methods() {
    let o = bin().arg("--list-methods").output().unwrap();
    assert_eq!(code(&o), 0);
    let names: Vec<String> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    assert_eq!(names.len(), 6);
    assert!(names.contains(&"abs-spider-admm".to_string()));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "1.0", "1.0");
    let out = dir.path().join("out");
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("summary.json").exists());
    assert!(out.join("abs-sadmm_seed0.csv").exists());
    assert!(out.join("abs-sadmm_seed1.csv").exists());
}

#[test]
fn seed_override_changes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "1.0", "1.0");
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = bin()
            .args(["run", "--seed-override", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        fs::read_to_string(out.join("abs-sadmm_seed0.csv")).unwrap()
    };
    let strip = |t: String| -> Vec<String> {
        t.lines()
            .map(|l| l.split(',').take(6).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(strip(run("5", "a")), strip(run("5", "b")));
    assert_ne!(strip(run("5", "c")), strip(run("6", "d")));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[run]\nmax_iters = \"many\"\n").unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = bin()
        .args(["run", "--config", "/nonexistent/exp.toml", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("broken.svm");
    fs::write(&data, "+1 1:0.5 1:0.7\n").unwrap();
    let o = bin()
        .args(["advise", "--problem", "fused-logistic", "--dataset"])
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn proximal_weight_below_floor_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "1.0", "1.0");
    let text = fs::read_to_string(&cfg).unwrap().replace("eta = 0.5", "eta = 0.5\nr = 1e-200");
    fs::write(&cfg, text).unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn all_diverged_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // features near f64::MAX^(1/2) overflow the first step length
    let cfg = write_config(dir.path(), "1e200", "1.0");
    let out = dir.path().join("o2");
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("summary.json").exists());
}

#[test]
fn advise_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.svm");
    let mut text = String::new();
    for i in 0..40 {
        let s = if i % 2 == 0 { "+1" } else { "-1" };
        text.push_str(&format!("{s} 1:{} 2:{} 3:0.5\n", (i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
    }
    fs::write(&data, text).unwrap();
    let o = bin()
        .args(["advise", "--problem", "fused-logistic", "--dataset"])
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n"], 40);
    assert!(v["report"]["beta_plus"].as_f64().unwrap() > 0.0);
    assert_eq!(v["spider_preset"]["epoch_len"], 7);
}
