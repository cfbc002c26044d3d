use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_bcnet");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bcnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, n: &str, out: &str) -> Output {
    let params = configs().join("params_example.json");
    bcnet(
        dir,
        &[
            "simulate",
            "--params",
            params.to_str().unwrap(),
            "--n",
            n,
            "--out",
            out,
            "--sweeps",
            "200",
            "--seed",
            "3",
        ],
    )
}

#[test]
fn simulate_then_estimate_recovers_support() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&simulate(d, "4000", "data.csv")), 0);
    let o = bcnet(
        d,
        &["estimate", "--data", "data.csv", "--out-prefix", "fit"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let edges = fs::read_to_string(d.join("fit_edges.csv")).unwrap();
    let truth = ["AB", "AE", "BC", "CD", "DE"];
    for line in edges.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if truth.contains(&format!("{}{}", f[2], f[3]).as_str()) {
            assert_eq!(f[4], "1", "{line}");
        }
    }
    // The thresholded adjacency is exactly the generating graph.
    let adj = fs::read_to_string(d.join("fit_adjacency.csv")).unwrap();
    let expect = "A,B,C,D,E\n0,1,0,0,1\n1,0,1,0,0\n0,1,0,1,0\n0,0,1,0,1\n1,0,0,1,0\n";
    assert_eq!(adj, expect);
    for f in [
        "fit_nodes.csv",
        "fit_adjacency.csv",
        "fit_estimate.json",
        "fit_manifest.json",
    ] {
        assert!(d.join(f).exists(), "{f}");
    }
}

#[test]
fn simulate_is_reproducible_and_rejects_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&simulate(d, "300", "a.csv")), 0);
    assert_eq!(code(&simulate(d, "300", "b.csv")), 0);
    assert_eq!(
        fs::read(d.join("a.csv")).unwrap(),
        fs::read(d.join("b.csv")).unwrap()
    );
    assert_eq!(code(&simulate(d, "0", "c.csv")), 2);
    assert!(!d.join("c.csv").exists());
}

#[test]
fn input_errors_report_location() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.csv"), "a,b\n1,0\n0,1\n1,-2\n").unwrap();
    let o = bcnet(d, &["estimate", "--data", "bad.csv", "--out-prefix", "x"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 4, column 2"), "{}", stderr(&o));

    fs::write(
        d.join("p.json"),
        r#"{"tau": [0, 0], "sigma": [[0, "x"], [0, 0]], "alpha2": 0}"#,
    )
    .unwrap();
    let o = bcnet(
        d,
        &[
            "simulate", "--params", "p.json", "--n", "5", "--out", "o.csv",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("sigma[0][1]") && stderr(&o).contains("line 1 column"),
        "{}",
        stderr(&o)
    );

    fs::write(d.join("c.json"), r#"{"reps": 2, "n_grdi": [50]}"#).unwrap();
    let o = bcnet(d, &["experiment", "--config", "c.json", "--out", "exp"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_grdi"), "{}", stderr(&o));
}

#[test]
fn separable_data_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rows: String = (0..60)
        .map(|i| format!("{},{}\n", [1, 0][i % 2], [1, 0][i % 2]))
        .collect();
    fs::write(d.join("sep.csv"), rows).unwrap();
    let o = bcnet(
        d,
        &[
            "estimate",
            "--data",
            "sep.csv",
            "--lambda",
            "0",
            "--out-prefix",
            "x",
        ],
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn unregularised_estimate_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&simulate(d, "1500", "data.csv")), 0);
    let o = bcnet(
        d,
        &[
            "estimate",
            "--data",
            "data.csv",
            "--lambda",
            "0",
            "--out-prefix",
            "u",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let edges = fs::read_to_string(d.join("u_edges.csv")).unwrap();
    assert!(edges
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(4) == Some("1")));
}

#[test]
fn full_subsample_equals_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&simulate(d, "800", "data.csv")), 0);
    assert_eq!(
        code(&bcnet(
            d,
            &["estimate", "--data", "data.csv", "--out-prefix", "e"]
        )),
        0
    );
    let o = bcnet(
        d,
        &[
            "subsample",
            "--data",
            "data.csv",
            "--fraction",
            "1",
            "--reps",
            "1",
            "--out-prefix",
            "s",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let est = fs::read_to_string(d.join("e_edges.csv")).unwrap();
    let sub = fs::read_to_string(d.join("s_subsamples.csv")).unwrap();
    let stripped: Vec<&str> = sub.lines().map(|l| l.split_once(',').unwrap().1).collect();
    assert_eq!(stripped, est.lines().collect::<Vec<_>>());
}

#[test]
fn meanfield_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&bcnet(d, &["meanfield", "--out-prefix", "mf"])), 0);
    let fp = fs::read_to_string(d.join("mf_fixed_points.csv")).unwrap();
    let rows: Vec<Vec<&str>> = fp.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows.iter().filter(|r| r[2] == "attracting").count(), 3);
    let mu: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    for k in 0..5 {
        assert!((mu[k] + mu[4 - k]).abs() < 1e-9);
    }
    let o = bcnet(
        d,
        &[
            "meanfield",
            "--alpha2-min",
            "3",
            "--alpha2-max",
            "1",
            "--out-prefix",
            "bad",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn smoke_experiment_finishes_within_a_minute() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = configs().join("experiment_smoke.json");
    let start = Instant::now();
    let o = bcnet(
        d,
        &[
            "experiment",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "exp",
        ],
    );
    assert!(start.elapsed() < Duration::from_secs(60));
    assert!([0, 4].contains(&code(&o)), "{}", stderr(&o));
    for f in [
        "report.csv",
        "report.json",
        "manifest.json",
        "cells/m6_n50.json",
        "cells/m6_n100.json",
    ] {
        assert!(d.join("exp").join(f).exists(), "{f}");
    }
}
