use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_kms-stationary");

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).output().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let idx = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[idx].parse().unwrap()).collect()
}

fn all_files(dir: &Path, out: &mut Vec<PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            all_files(&p, out);
        } else {
            out.push(p);
        }
    }
}

#[test]
fn default_verify_passes_and_stamps_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files = Vec::new();
    all_files(dir.path(), &mut files);
    assert!(files.len() >= 8);
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        assert!(text.starts_with("# manifest config_hash="), "{}", f.display());
    }
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("pass = true"));
}

#[test]
fn negative_control_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--negative-control"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("kms_jump[Y1]") && report.contains("FAIL"));
}

#[test]
fn malformed_config_is_rejected_before_computation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"target": {"kind": "window", "b": -1, "c": 0, "delta": 0.5, "eta": 2}}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["verify", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));
    assert!(!out_dir.exists());
}

#[test]
fn help_lists_defaults() {
    let out = Command::new(BIN).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for key in ["margin", "epsilon", "max_m", "observables", "tolerances"] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn prepare_starts_at_initial_distance() {
    // one qubit, H = X, Gibbs β = 1: ½‖I/2 - e^{-βH}/Z‖₁ = tanh(β)/2
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["prepare"], dir.path());
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("trajectory_exact_mixed.csv"));
    assert_eq!(rows[0][..2], ["t".to_string(), "trace_distance".to_string()]);
    let d = column(&rows, "trace_distance");
    assert_eq!(column(&rows, "t")[0], 0.0);
    assert!((d[0] - 1f64.tanh() / 2.0).abs() < 1e-12, "{}", d[0]);
    let trunc = csv_rows(&dir.path().join("trajectory_truncated_mixed.csv"));
    assert!(trunc[0].contains(&"kernel_distance".to_string()));
}

#[test]
fn shipped_two_qubit_gibbs_reaches_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("gibbs_2q.json");
    let out = run(&["prepare", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for state in ["mixed", "zero", "top"] {
        let rows = csv_rows(&dir.path().join(format!("trajectory_exact_{state}.csv")));
        let d = column(&rows, "trace_distance");
        assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{state}");
        assert!(*d.last().unwrap() <= 1e-6);
    }
}

#[test]
fn single_value_sweep_matches_verify() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["verify"], &dir.path().join("v")).status.success());
    assert!(run(&["sweep", "--param", "M", "--values", "32"], &dir.path().join("s")).status.success());
    let report = csv_rows(&dir.path().join("v/report.csv"));
    let jump_max = report
        .iter()
        .filter(|r| r[0].starts_with("jump_truncation"))
        .map(|r| r[1].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    let sweep = csv_rows(&dir.path().join("s/sweep.csv"));
    let err = column(&sweep, "max_jump_error")[0];
    assert!((err - jump_max).abs() <= 1e-12 * jump_max.max(1e-300), "{err} vs {jump_max}");
}

#[test]
fn m_sweep_error_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("gibbs_2q.json");
    let out = run(
        &["sweep", "--config", cfg.to_str().unwrap(), "--param", "M", "--values", "16,2,8,4"],
        dir.path(),
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(column(&rows, "M"), vec![2.0, 4.0, 8.0, 16.0]);
    let err = column(&rows, "max_jump_error");
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");
}

#[test]
fn delta_sweep_norms_scale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.json");
    fs::write(
        &cfg,
        r#"{"n_sites": 2, "margin": 1.5, "max_m": 8,
            "target": {"kind": "window", "b": -1.0, "c": 0.5, "delta": 0.5, "eta": 1e-3}}"#,
    )
    .unwrap();
    let out = run(
        &["sweep", "--config", cfg.to_str().unwrap(), "--param", "delta", "--values", "0.5,0.25"],
        &dir.path().join("o"),
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("o/sweep.csv"));
    let d1 = column(&rows, "d1_g");
    // rows sorted by δ: d1[0] is δ = 0.25
    let ratio = d1[0] / d1[1];
    assert!((1.0..=16.0).contains(&ratio), "{ratio}");
}

#[test]
fn encode_check_reports_each_jump() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["encode-check", "--seed", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("encode_check.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows[1..].iter().all(|r| r.last().unwrap() == "true"));
}
