use std::collections::HashSet;
use std::path::Path;
use std::process::{Command, Output};

use dtrp_cli::config::RunConfig;

fn dtrp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtrp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const URS: &str = r#"
policy = "urs"
lambda = 3.0
radius = 0.1
horizon = 300.0
replications = 10
seed = 42

[output]
csv = "out.csv"
json = "out.json"
events = "events.txt"
"#;

#[test]
fn identical_seeds_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        write(d.path(), "c.toml", URS);
        let out = dtrp(d.path(), &["run", "c.toml"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["out.csv", "out.json", "events.txt"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn ten_replications_have_distinct_seeds() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.toml", URS);
    assert!(dtrp(d.path(), &["run", "c.toml"]).status.success());
    let mut reader = csv::Reader::from_path(d.path().join("out.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "seed").unwrap();
    let seeds: HashSet<String> = reader.records().map(|r| r.unwrap()[col].to_string()).collect();
    assert_eq!(seeds.len(), 10);
    let config = RunConfig::from_toml(URS).unwrap();
    let expected: HashSet<String> = (0..10).map(|r| config.replication_seed(r).to_string()).collect();
    assert_eq!(seeds, expected);
}

#[test]
fn minimal_config_runs_with_defaults() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "m.toml", "policy = \"urs\"\nlambda = 2.0\nradius = 0.2\nhorizon = 200.0\n");
    let out = dtrp(d.path(), &["run", "m.toml"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("run-0 seed="), "{text}");
    assert!(dtrp(d.path(), &["validate", "m.toml"]).status.success());
    let bounds = dtrp(d.path(), &["bounds", "m.toml"]);
    let v: serde_json::Value = serde_json::from_slice(&bounds.stdout).unwrap();
    assert!((v["selected"].as_f64().unwrap() - 1.25).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.toml", "policy = \"urs\"\nlambda = -1.0\nradius = 0.2\nhorizon = 10.0\n");
    assert_eq!(dtrp(d.path(), &["run", "bad.toml"]).status.code(), Some(1));
    write(d.path(), "typo.toml", "policy = \"urs\"\nlambda = 1.0\nradius = 0.2\nhorizon = 10.0\nradus = 1\n");
    let out = dtrp(d.path(), &["validate", "typo.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radus"));
    assert_eq!(dtrp(d.path(), &["run", "missing.toml"]).status.code(), Some(1));
    write(
        d.path(),
        "hot.toml",
        "policy = \"urs\"\nlambda = 200.0\nradius = 0.01\nhorizon = 500.0\nqueue_cap = 500\n",
    );
    assert_eq!(dtrp(d.path(), &["run", "hot.toml"]).status.code(), Some(2));
    // A spec named after a preset inherits that preset's checks.
    write(
        d.path(),
        "s.toml",
        r#"
name = "urs-r-sweep"
replications = 2
[base]
policy = "urs"
lambda = 5.0
radius = 0.1
horizon = 400.0
[sweep]
parameter = "radius"
values = [0.2, 0.1]
"#,
    );
    let out = dtrp(d.path(), &["campaign", "s.toml", "--check", "--out", "res"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    for f in ["urs-r-sweep.csv", "urs-r-sweep_summary.csv", "urs-r-sweep.json"] {
        assert!(d.path().join("res").join(f).exists());
    }
    assert_eq!(dtrp(d.path(), &["campaign", "no-such-preset"]).status.code(), Some(1));
}
