use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn covlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covlab"))
        .args(args)
        .env("COVLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, args: &[&str]) {
    let out = dir.to_str().unwrap();
    let mut full = vec!["simulate", "--out", out];
    full.extend_from_slice(args);
    let o = covlab(&full);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn help_lists_every_method_tag() {
    for args in [
        vec!["--help"],
        vec!["backtest", "--help"],
        vec!["estimate", "--help"],
    ] {
        let text = stdout(&covlab(&args));
        assert!(
            text.contains("nw, rnw, poet, oft, lslw, nls, sfnl"),
            "{text}"
        );
    }
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    simulate(&a, &["--p", "8", "--t", "30", "--k", "2", "--seed", "11"]);
    simulate(&b, &["--p", "8", "--t", "30", "--k", "2", "--seed", "11"]);
    simulate(&c, &["--p", "8", "--t", "30", "--k", "2", "--seed", "12"]);
    for f in [
        "returns.csv",
        "factors.csv",
        "true_cov.csv",
        "true_precision.csv",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_ne!(
        fs::read(a.join("returns.csv")).unwrap(),
        fs::read(c.join("returns.csv")).unwrap()
    );
    let o = covlab(&[
        "simulate",
        "--p",
        "3",
        "--t",
        "5",
        "--k",
        "1",
        "--seed",
        "99",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(stdout(&o).contains("seed=99"));
}

#[test]
fn simulate_shapes() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        &["--p", "5", "--t", "20", "--k", "1", "--seed", "3"],
    );
    let header = fs::read_to_string(dir.path().join("factors.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 2);

    let args = [
        "--p",
        "6",
        "--t",
        "20",
        "--k",
        "1",
        "--loading-scale",
        "0",
        "--errors",
        "banded",
        "--seed",
        "3",
    ];
    simulate(dir.path(), &args);
    let omega = read_matrix(&dir.path().join("true_precision.csv"));
    assert_eq!(omega.len(), 6);
    for (i, row) in omega.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_eq!(v.abs() > 1e-9, i.abs_diff(j) <= 1, "({i},{j}) = {v}");
        }
    }
}

#[test]
fn backtest_three_windows_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(
        &data,
        &["--p", "10", "--t", "43", "--k", "2", "--seed", "5"],
    );
    let out = dir.path().join("res");
    let o = covlab(&[
        "backtest",
        "--returns",
        data.join("returns.csv").to_str().unwrap(),
        "--factors",
        data.join("factors.csv").to_str().unwrap(),
        "--method",
        "lslw,oft",
        "--t-i",
        "40",
        "--cost",
        "50",
        "--run-id",
        "mini",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("windows=3"));
    for metric in ["sr", "return", "variance", "turnover"] {
        let csv = fs::read_to_string(out.join(format!("mini_{metric}.csv"))).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "method,GMV,MSR,MV");
        assert!(lines[1].starts_with("OFT,") || lines[1].starts_with("LSLW,"));
        assert_eq!(lines.len(), 3);
        let txt = fs::read_to_string(out.join(format!("mini_{metric}.txt"))).unwrap();
        assert!(txt.contains("T_I=40 cost=0.005"));
        assert!(txt.contains("**"));
    }
}

#[test]
fn backtest_tables_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(
        &data,
        &["--p", "12", "--t", "50", "--k", "2", "--seed", "8"],
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = covlab(&[
            "backtest",
            "--returns",
            data.join("returns.csv").to_str().unwrap(),
            "--factors",
            data.join("factors.csv").to_str().unwrap(),
            "--t-i",
            "45",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for metric in ["sr", "return", "variance", "turnover"] {
        for ext in ["csv", "txt"] {
            let f = format!("run_{metric}.{ext}");
            assert_eq!(
                fs::read(a.join(&f)).unwrap(),
                fs::read(b.join(&f)).unwrap(),
                "{f}"
            );
        }
    }
}

#[test]
fn window_longer_than_panel_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        &["--p", "4", "--t", "30", "--k", "1", "--seed", "1"],
    );
    let out = dir.path().join("res");
    let o = covlab(&[
        "backtest",
        "--returns",
        dir.path().join("returns.csv").to_str().unwrap(),
        "--method",
        "nls",
        "--t-i",
        "40",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("T_I=40"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn estimate_poet_reports_three_factors() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        &["--p", "100", "--t", "300", "--k", "3", "--seed", "21"],
    );
    let o = covlab(&[
        "estimate",
        "--returns",
        dir.path().join("returns.csv").to_str().unwrap(),
        "--method",
        "poet",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(" k=3 "), "{}", stdout(&o));
    let theta = read_matrix(&dir.path().join("run_poet_precision.csv"));
    assert_eq!(theta.len(), 100);
}

#[test]
fn estimate_shrinkage_on_pure_noise_is_near_identity() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        &[
            "--p",
            "5",
            "--t",
            "4000",
            "--k",
            "1",
            "--loading-scale",
            "0",
            "--seed",
            "4",
        ],
    );
    let o = covlab(&[
        "estimate",
        "--returns",
        dir.path().join("returns.csv").to_str().unwrap(),
        "--method",
        "lslw",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let theta = read_matrix(&dir.path().join("run_lslw_precision.csv"));
    for (i, row) in theta.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((v - target).abs() < 0.1, "({i},{j}) = {v}");
        }
    }
}

#[test]
fn unknown_method_is_a_usage_error() {
    let o = covlab(&["estimate", "--method", "ledoit"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("ledoit"));
    assert!(err.contains("nw, rnw, poet, oft, lslw, nls, sfnl"), "{err}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        &["--p", "6", "--t", "40", "--k", "1", "--seed", "2"],
    );
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "[data]\nreturns = returns.csv\n\n[backtest]\nt_i = 20\nmethods = lslw\nobjectives = gmv\n\n[run]\nrun_id = cfgrun\nout = res\n",
    )
    .unwrap();
    let o = covlab(&["backtest", "--config", cfg.to_str().unwrap(), "--t-i", "30"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("windows=10"));
    let csv = fs::read_to_string(dir.path().join("res/cfgrun_sr.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,GMV,MSR,MV");
    assert!(lines[1].starts_with("LSLW,") && lines[1].ends_with(",NA,NA"));

    fs::write(&cfg, "[backtest]\nwindow = 20\n").unwrap();
    let o = covlab(&["backtest", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown key 'window'"));

    fs::write(&cfg, "[data]\nreturns = missing.csv\n").unwrap();
    let o = covlab(&["backtest", "--config", cfg.to_str().unwrap()]);
    assert!(stderr(&o).contains("file not found"));
}
