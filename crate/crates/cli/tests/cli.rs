use std::process::{Command, Output};

fn mltt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mltt")).args(args).output().expect("binary runs")
}

fn json_lines(bytes: &[u8]) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(bytes).lines().map(|l| serde_json::from_str(l).expect("json line")).collect()
}

#[test]
fn check_params_reports_margins() {
    let out = mltt(&["check-params", "--eta", "4", "--theta", "2.5", "--p", "0.9", "--kappa", "0.45", "--a0", "3", "--c", "1.1"]);
    assert!(out.status.success());
    let report = &json_lines(&out.stdout)[0];
    assert_eq!(report["admissible"], true);
    assert!((report["c_bound"].as_f64().unwrap() - 1.1483801519982795).abs() < 1e-9);

    let out = mltt(&["check-params", "--eta", "2", "--theta", "0.9", "--p", "0.9", "--kappa", "0.45", "--c", "1.1"]);
    assert!(out.status.success());
    assert_eq!(json_lines(&out.stdout)[0]["admissible"], false);
}

#[test]
fn failures_emit_machine_readable_errors() {
    let out = mltt(&["check-params", "--eta", "0.5", "--theta", "1", "--p", "0.9", "--kappa", "0.5", "--c", "1.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_lines(&out.stderr)[0]["error"], "input");

    let out = mltt(&["eval", "--model", "/nonexistent/bundle", "--y", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_lines(&out.stderr)[0]["error"], "io");

    let out = mltt(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_lines(&out.stderr)[0]["error"], "usage");
}

#[test]
fn fit_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("model");
    let out = mltt(&[
        "fit", "--levels", "2", "--k", "1", "--finest-log2", "5", "--degree", "2", "--seed", "3",
        "--output", bundle.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = &json_lines(&out.stdout)[0];
    assert_eq!(summary["samples"], serde_json::json!([16, 12]));
    assert_eq!(summary["work"].as_f64(), summary["work_est"].as_f64());

    let points = dir.path().join("points.txt");
    std::fs::write(&points, "# y1..y6\n0 0 0 0 0 0\n0.5,-0.5,0.1,0.2,0.3,0.4\n").unwrap();
    let out = mltt(&["eval", "--model", bundle.to_str().unwrap(), "--points", points.to_str().unwrap()]);
    assert!(out.status.success());
    let values: Vec<f64> = String::from_utf8_lossy(&out.stdout).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 2);
    // The QoI of the experiment problem at y = 0 is 100 / (12 zeta(2)) ~ 5.07.
    assert!((values[0] - 100.0 / 12.0 / 1.6449340668482264).abs() < 0.2, "{values:?}");
}

#[test]
fn experiment_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = mltt(&["experiment", "--print-config", "--trials", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("trials = 3"));
    let path = dir.path().join("c.toml");
    std::fs::write(&path, &text).unwrap();
    let again = mltt(&["experiment", "--print-config", "--config", path.to_str().unwrap()]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);

    std::fs::write(&path, "unknown_key = 1\n").unwrap();
    let bad = mltt(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(json_lines(&bad.stderr)[0]["error"], "parse");
}

#[test]
fn small_experiment_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(
        &config,
        "finest_log2 = 3\nlevels = [1, 2]\nk = [1]\ntrials = 1\nalgorithms = [\"sals\"]\nweights = [\"exp-weak\"]\ndegree = 2\n\
         [reference]\ntest_size = 10\nelements_log2 = 6\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let args = ["--config", config.to_str().unwrap(), "--output", out_dir.to_str().unwrap()];
    let reference = mltt(&[&["reference"][..], &args].concat());
    assert!(reference.status.success());
    assert_eq!(json_lines(&reference.stdout)[0]["size"], 10);
    let run = mltt(&[&["experiment"][..], &args].concat());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let s = &json_lines(&run.stdout)[0];
    assert_eq!((s["written"].as_u64(), s["failed"].as_u64()), (Some(2), Some(0)));
    let rerun = mltt(&[&["experiment"][..], &args].concat());
    assert_eq!(json_lines(&rerun.stdout)[0]["written"], 0);
}

#[test]
fn rip_study_prints_one_line_per_size() {
    let out = mltt(&["rip", "--n", "50", "--n", "200", "--trials", "5"]);
    assert!(out.status.success());
    let lines = json_lines(&out.stdout);
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["n"], 200);
}
