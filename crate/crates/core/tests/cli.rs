use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_levylab");

const SMALL: &str = r#"
samples = 400
[[experiment]]
name = "poisson"
op = "poisson_example"
[experiment.params]
t = 1.0
xis = [[1.0], [0.0, 1.0]]

[[experiment]]
name = "slab"
op = "dirichlet_slab"
[experiment.params]
a = -1.0
b = 1.0
fa = 0.0
fb = 1.0
points = [0.0]
"#;

fn run(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("suite.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .args(extra)
        .env_remove("LEVYLAB_SEED")
        .env_remove("LEVYLAB_OUT")
        .output()
        .unwrap()
}

#[test]
fn empty_suite_exits_zero() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let o = run(d.path(), "seed = 3\n", &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.trim(), levylab::harness::CSV_HEADER);
    assert!(out.join("run.json").exists());
}

#[test]
fn config_errors_exit_two_with_location() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "seed = 3\nsamplez = 4\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("samplez") && err.contains("line 2"), "{err}");

    let o = run(d.path(), "[[experiment]]\nname = \"x\"\nop = \"poisson_example\"\n[experiment.params]\nt = 1.0\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("xis"));
}

#[test]
fn same_seed_gives_same_bytes_and_env_overrides_apply() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a");
    let b = d.path().join("b");
    assert_eq!(run(d.path(), SMALL, &["--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(d.path(), SMALL, &["--out", b.to_str().unwrap(), "--threads", "3"]).status.code(), Some(0));
    let ca = std::fs::read(a.join("summary.csv")).unwrap();
    assert_eq!(ca, std::fs::read(b.join("summary.csv")).unwrap());

    let env_out = d.path().join("env");
    let cfg = d.path().join("suite.toml");
    let o = Command::new(BIN)
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("LEVYLAB_SEED", "99")
        .env("LEVYLAB_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let ce = std::fs::read(env_out.join("summary.csv")).unwrap();
    assert_ne!(ca, ce);
}

#[test]
fn filter_selects_by_glob() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let o = run(d.path(), SMALL, &["--out", out.to_str().unwrap(), "--filter", "poi*"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("poisson/")));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn failed_expectation_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("name = \"slab\"", "name = \"slab\"\nexpect = \"fail\"");
    let o = run(d.path(), &cfg, &["--out", d.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
