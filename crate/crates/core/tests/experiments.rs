use std::fs;
use std::path::Path;

use locemp::experiments::{chaining_audit, rate_regression, run, ExperimentConfig, XTransform, RUNS_HEADER};

const CONFIG: &str = r#"
n_grid = [128, 256, 512, 1024]
replications = 3
seed = 11

[process]
kind = "gaussian_ar1"
rho = 0.4

[bandwidth]
kind = "polynomial"
alpha = 0.4

[family]
name = "indicators"
count = 3
lo = -0.5
hi = 0.5
"#;

fn config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(CONFIG).unwrap();
    cfg.output = dir.to_path_buf();
    cfg
}

/// Drops the trailing `wall_time` column.
fn strip_wall_time(text: &str) -> String {
    text.lines()
        .map(|l| l.rsplit_once(',').unwrap().0)
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn run_is_reproducible_on_disk() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = run(&config(d1.path())).unwrap();
    run(&config(d2.path())).unwrap();
    assert_eq!(out.runs.len(), 4 * 3);
    assert_eq!(out.summary.len(), 4);

    let read = |d: &Path, f: &str| fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(read(d1.path(), "summary.csv"), read(d2.path(), "summary.csv"));
    let runs = read(d1.path(), "runs.csv");
    assert_eq!(runs.lines().next().unwrap(), RUNS_HEADER.join(","));
    assert_eq!(strip_wall_time(&runs), strip_wall_time(&read(d2.path(), "runs.csv")));
    // Fewer than 100 replications: no Orlicz estimate.
    assert!(out.summary.iter().all(|r| r.emp_orlicz.is_nan()));
}

#[test]
fn regression_from_written_summary() {
    let d = tempfile::tempdir().unwrap();
    let out = run(&config(d.path())).unwrap();
    let csv = d.path().join("summary.csv");
    // kde_rate = sqrt(-log a) sqrt(log n) is exactly linear in log n here.
    let r = rate_regression(&csv, "kde_rate", XTransform::LogN, false).unwrap();
    assert!((r.slope - 0.4_f64.sqrt()).abs() < 1e-9, "{r:?}");
    assert!((r.r2 - 1.0).abs() < 1e-12);
    let r = rate_regression(&csv, "mean_sup", XTransform::LogN, true).unwrap();
    assert!(r.slope.is_finite() && r.stderr >= 0.0);
    assert!(out.summary.iter().all(|s| s.thm1_rhs > 0.0 && s.mean_sup > 0.0));
    assert!(rate_regression(&csv, "missing", XTransform::LogN, false).is_err());
}

#[test]
fn audit_writes_csv_and_passes() {
    let d = tempfile::tempdir().unwrap();
    let mut cfg = config(d.path());
    cfg.process = toml::from_str("kind = \"m_dependent\"\nm = 2").unwrap();
    let out = chaining_audit(&cfg).unwrap();
    assert_eq!(out.pass_rate, 1.0);
    let text = fs::read_to_string(d.path().join("audit.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,replication,member,k,lhs,rhs,holds");
    assert_eq!(text.lines().count(), out.rows.len() + 1);
}

#[test]
fn overrides_and_bad_schedule() {
    let cfg = ExperimentConfig::from_toml_with_overrides(CONFIG, &["seed=99".into(), "bandwidth.alpha=0.3".into()])
        .unwrap();
    assert_eq!(cfg.seed, 99);
    let bad = ExperimentConfig::from_toml_with_overrides(CONFIG, &["bandwidth.b_factor=40".into()]).unwrap();
    let err = bad.validate().unwrap_err();
    assert!(err.to_string().contains("at n ="), "{err}");
}
