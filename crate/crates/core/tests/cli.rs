use std::path::Path;
use std::process::{Command, Output};

fn dsgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsgd"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const RUN_CONFIG: &str = r#"seed = 4
steps = 95
record_every = 10

[schedule]
kind = "constant"
alpha = 0.05

[topology]
kind = "knng"
m = 5

[data]
format = "synthetic"
n = 50
dim = 3
"#;

#[test]
fn run_writes_one_row_per_recorded_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RUN_CONFIG);
    let out = dir.path().join("out");
    let res = dsgd(&["--config", &cfg, "--out-dir", out.to_str().unwrap(), "run"]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,loss,consensus_dev,avg_iterate_norm,projection_events"
    );
    let steps: Vec<usize> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let expected: Vec<usize> = (1..=9).map(|k| 10 * k).chain([95]).collect();
    assert_eq!(steps, expected);
    assert!(out.join("metadata.json").exists());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RUN_CONFIG);
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    assert!(dsgd(&[
        "--config",
        &cfg,
        "--out-dir",
        first.to_str().unwrap(),
        "run"
    ])
    .status
    .success());
    let resolved = first.join("resolved_config.toml");
    let res = dsgd(&[
        "--config",
        resolved.to_str().unwrap(),
        "--out-dir",
        second.to_str().unwrap(),
        "run",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for name in ["trajectory.csv", "resolved_config.toml"] {
        assert_eq!(
            std::fs::read(first.join(name)).unwrap(),
            std::fs::read(second.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn seed_override_changes_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), RUN_CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    dsgd(&["--config", &cfg, "--out-dir", a.to_str().unwrap(), "run"]);
    dsgd(&[
        "--config",
        &cfg,
        "--out-dir",
        b.to_str().unwrap(),
        "--seed",
        "5",
        "run",
    ]);
    assert_ne!(
        std::fs::read(a.join("trajectory.csv")).unwrap(),
        std::fs::read(b.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        dsgd(&["--config", missing.to_str().unwrap(), "run"])
            .status
            .code(),
        Some(2)
    );

    let bad_key = write_config(dir.path(), "stepz = 3\n");
    assert_eq!(dsgd(&["--config", &bad_key, "run"]).status.code(), Some(2));

    let bad_data = write_config(
        dir.path(),
        "[data]\nformat = \"csv\"\npath = \"/nonexistent/data.csv\"\n",
    );
    assert_eq!(dsgd(&["--config", &bad_data, "run"]).status.code(), Some(3));

    let matrix = dir.path().join("w.csv");
    std::fs::write(&matrix, "0.5,0.5,0\n0.5,0.5,0\n0,0,1\n").unwrap();
    let res = dsgd(&["validate-mixing", "--matrix", matrix.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4));

    std::fs::write(&matrix, "0.5,0.5\n0.5,0.5\n").unwrap();
    let res = dsgd(&["validate-mixing", "--matrix", matrix.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
}

#[test]
fn bounds_command_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.toml");
    std::fs::write(
        &params,
        "b = 1.0\nl = 1.0\nnu = 0.1\nlambda = 0.0\nm = 10\nn = 100\nsteps = 4\nr = 1.0\n\
         [schedule]\nkind = \"constant\"\nalpha = 0.1\n",
    )
    .unwrap();
    let res = dsgd(&["bounds", "--params", params.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("thm2_stability"));
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "seed = 2\n[model]\nkind = \"logistic-l2\"\n[data]\nformat = \"synthetic\"\nn = 1000\ndim = 22\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let res = dsgd(&[
            "--config",
            &cfg,
            "gen-data",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    assert!(rows.len() == 1000 || rows.len() == 1001);
    assert_eq!(rows.last().unwrap().split(',').count(), 23);
}
