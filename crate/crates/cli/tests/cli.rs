use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn levent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levent")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn point_prints_an_entangled_report() {
    let o = levent(&["point", "--lambda2-khz", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(field(&text, "variant"), "full-rwa");
    assert_eq!(field(&text, "stable"), "true");
    assert!(field(&text, "log_negativity").parse::<f64>().unwrap() > 0.0);
}

#[test]
fn point_at_equal_couplings_is_unstable() {
    let o = levent(&["point", "--variant", "cs-only-rwa", "--lambda2-khz", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(field(&text, "stable"), "false");
    assert_eq!(field(&text, "log_negativity"), "-");
}

#[test]
fn point_writes_a_one_row_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("point.csv");
    let o = levent(&["point", "--covariance", "--csv", path(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("full-rwa,point,"));
}

#[test]
fn sweep_writes_one_row_per_grid_value() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let o = levent(&[
        "sweep",
        "-p",
        "lambda_ratio",
        "--from",
        "0.1",
        "--to",
        "0.9",
        "--points",
        "9",
        "--series",
        "probe",
        "-o",
        path(&csv),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("series,parameter,value,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.starts_with("probe,lambda_ratio,")));
}

#[test]
fn sweep_to_standard_output_with_explicit_values() {
    let o = levent(&["sweep", "-p", "n", "--variant", "cs-only-rwa", "--values", "0,1,10"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn empty_grid_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    let o = levent(&[
        "sweep",
        "-p",
        "lambda_ratio",
        "--from",
        "0.1",
        "--to",
        "0.9",
        "--points",
        "0",
        "-o",
        path(&csv),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!csv.exists());
}

#[test]
fn bad_configurations_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "lambda_khz = 1\n").unwrap();
    assert_eq!(levent(&["point", "-c", path(&config)]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(levent(&["point", "-c", path(&missing)]).status.code(), Some(2));
    assert_eq!(levent(&["point", "--q1", "-3"]).status.code(), Some(2));
    let o = levent(&["sweep", "-p", "q", "--from", "0", "--to", "1e9", "--geometric"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("model.toml");
    fs::write(
        &config,
        "variant = \"cs-only-rwa\"\nlambda2_khz = 50\nn1 = 0\nn2 = 0\nq1 = 1e8\nq2 = 1e8\n",
    )
    .unwrap();
    let base = stdout(&levent(&["point", "-c", path(&config)]));
    let hot = stdout(&levent(&["point", "-c", path(&config), "--n1", "1e6", "--n2", "1e6"]));
    assert_eq!(field(&base, "variant"), "cs-only-rwa");
    let en = |t: &str| field(t, "log_negativity").parse::<f64>().unwrap();
    assert!(en(&base) > en(&hot));
}

#[test]
fn preset_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fig5.csv");
    let svg = dir.path().join("fig5.svg");
    let o = levent(&["preset", "fig5", "-o", path(&csv), "--plot", path(&svg)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.lines().any(|l| l.starts_with("rwa,")));
    assert!(text.lines().any(|l| l.starts_with("counterrotating,")));
    let picture = fs::read_to_string(&svg).unwrap();
    assert!(picture.contains("<svg"));
    assert!(picture.contains("counterrotating"));
}

#[test]
fn unknown_preset_is_rejected() {
    assert_eq!(levent(&["preset", "fig9"]).status.code(), Some(2));
}

#[test]
fn plot_redraws_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    let svg = dir.path().join("one.svg");
    assert_eq!(levent(&["point", "--csv", path(&csv)]).status.code(), Some(0));
    let o = levent(&[
        "plot",
        path(&csv),
        "-o",
        path(&svg),
        "--panels",
        "log_negativity,mean_n1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&svg).unwrap().contains("<circle"));

    let o = levent(&["plot", path(&csv), "-o", path(&svg), "--panels", "colour"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn feasibility_reports_the_estimates() {
    let o = levent(&["feasibility"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let n: f64 = field(&text, "thermal_occupancy").parse().unwrap();
    assert!((n / 1.0248e6 - 1.0).abs() < 1e-3);
    assert!(text.contains("phase_noise_heating"));
    assert!(text.contains("beam_intensity"));
}

#[test]
fn oracle_check_agrees_on_a_constant_model() {
    let o = levent(&[
        "oracle-check",
        "--variant",
        "cs-only-rwa",
        "--lambda1-khz",
        "1",
        "--lambda2-khz",
        "0.5",
        "--kappa1-khz",
        "1.2",
        "--omega1-khz",
        "20",
        "--omega2-khz",
        "20",
        "--q1",
        "100",
        "--q2",
        "100",
        "--n1",
        "1",
        "--n2",
        "1",
        "--trajectories",
        "100",
        "--dt",
        "2e-6",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.contains("ode relative diff"));
    assert!(text.contains("monte carlo max |z|"));
}

#[test]
fn oracle_check_agrees_on_a_periodic_model() {
    let o = levent(&[
        "oracle-check",
        "--variant",
        "counterrotating",
        "--lambda2-khz",
        "50",
        "--k-list",
        "1,2,3,4,5",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert_eq!(field(&text, "production K"), "3");
    assert!(text.contains("floquet vs periodic ode"));
}

#[test]
fn oracle_check_refuses_unstable_models() {
    let o = levent(&["oracle-check", "--variant", "full-rwa", "--lambda2-khz", "100"]);
    assert_eq!(o.status.code(), Some(3));
}
