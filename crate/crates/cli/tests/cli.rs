use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpe")).args(args).output().expect("spawn cpe")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// The number after `prefix` on the first line starting with it.
fn value_after(text: &str, prefix: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(prefix))
        .unwrap_or_else(|| panic!("no line starting with {prefix:?} in\n{text}"));
    line[prefix.len()..]
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .unwrap_or_else(|| panic!("no number in {line:?}"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn modulus_example_prints_eps_squared() {
    let o = cpe(&["check-modulus", "--loss", "sq", "--eps", "0.1", "--grid", "1e-4"]);
    assert_eq!(code(&o), 0);
    let delta = value_after(&stdout(&o), "eps = 0.1: delta ≈");
    assert!((delta - 0.01).abs() <= 2e-4, "{delta}");
}

#[test]
fn composite_form_quadruples_delta() {
    let o = cpe(&["check-modulus", "--loss", "sq", "--eps", "0.1", "--form", "composite", "--grid", "1e-3"]);
    assert_eq!(code(&o), 0);
    let delta = value_after(&stdout(&o), "eps = 0.1: delta ≈");
    assert!((delta - 0.04).abs() <= 2e-3, "{delta}");
}

#[test]
fn three_point_reproduction_passes() {
    for name in ["repro-sec65", "repro-three-point"] {
        let o = cpe(&[name]);
        assert_eq!(code(&o), 0, "{name}");
        let text = stdout(&o);
        assert!(text.contains("f0 = (19/39, -17/39)"), "{text}");
        assert!(text.lines().any(|l| l == "sqh recovery PASS"), "{text}");
    }
}

#[test]
fn loss_eval_at_the_optimum_has_no_excess() {
    let o = cpe(&["loss-eval", "--loss", "log", "--eta", "0.5", "--pred", "0.5"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(value_after(&text, "excess risk =").abs() < 1e-12);
    assert!((value_after(&text, "risk =") - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn loss_eval_raw_prediction_for_hinge() {
    let o = cpe(&["loss-eval", "--loss", "hinge", "--eta", "0.3", "--raw", "1"]);
    assert_eq!(code(&o), 0);
    // 0.7 * 2 at v = 1 against min(2 * 0.3, 2 * 0.7)
    let text = stdout(&o);
    assert!((value_after(&text, "risk =") - 1.4).abs() < 1e-12);
    assert!((value_after(&text, "excess risk =") - 0.8).abs() < 1e-12);
}

#[test]
fn hinge_has_no_probability_predictions() {
    let o = cpe(&["loss-eval", "--loss", "hinge", "--eta", "0.3", "--pred", "0.5"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn invalid_flags_exit_with_one() {
    let cases: &[&[&str]] = &[
        &["loss-eval", "--loss", "log", "--eta", "1.5", "--pred", "0.5"],
        &["loss-eval", "--loss", "log", "--eta", "0.5"],
        &["loss-eval", "--loss", "nope", "--eta", "0.5", "--pred", "0.5"],
        &["loss-table", "--loss", "sq", "--grid", "0"],
        &["check-modulus", "--loss", "sq", "--eps", "0.1", "--grid", "0.05"],
        &["check-modulus", "--loss", "sq"],
        &["check-properness", "--loss", "sq", "--link", "tanh"],
        &["fit", "--problem", "/nonexistent/problem.json", "--loss", "sq"],
        &["converge", "--config", "x.json", "--reps", "0"],
        &["bogus"],
        &["loss-eval", "-l", "sq"],
    ];
    for args in cases {
        assert_eq!(code(&cpe(args)), 1, "{args:?}");
    }
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(code(&cpe(&["--help"])), 0);
    assert_eq!(code(&cpe(&["--version"])), 0);
}

#[test]
fn bregman_identity_holds_on_the_command_line() {
    for loss in ["sq", "log"] {
        for form in ["cpe", "composite"] {
            let o = cpe(&["check-bregman", "--loss", loss, "--eta", "0.3", "--pred", "0.6", "--form", form]);
            assert_eq!(code(&o), 0, "{loss} {form}");
            assert!(value_after(&stdout(&o), "difference =") < 1e-8);
        }
    }
}

#[test]
fn loss_tables_have_the_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    for loss in ["log", "sq", "hinge"] {
        let path = dir.path().join(format!("{loss}.csv"));
        let o = cpe(&["loss-table", "--loss", loss, "--grid", "0.1", "--out", path.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
        assert_eq!(rows[0], ["eta", "psi", "vstar_lo", "vstar_hi", "v", "inv_link"]);
        assert_eq!(rows.len(), 12);
        let at = |eta: &str| rows.iter().find(|r| r[0] == eta).unwrap().clone();
        match loss {
            "log" => assert_eq!(at("0.5")[1].parse::<f64>().unwrap(), 0.0),
            "sq" => assert_eq!(at("1")[1].parse::<f64>().unwrap(), 1.0),
            _ => assert!(rows[1..].iter().all(|r| r[1].is_empty() && r[5].is_empty())),
        }
    }
}

#[test]
fn properness_audit_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.json");
    let o = cpe(&["check-properness", "--loss", "log", "--grid", "1e-2", "--eps", "0.1", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("link logit: proper = true, strictly proper = true, degenerate = false"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["audits"][0]["is_strictly_proper"], true);
    assert_eq!(doc["cover"]["disjoint"], true);
    assert_eq!(doc["audits"][0]["deltas"][0]["eps"], 0.1);
}

#[test]
fn hinge_audit_reports_every_candidate_link() {
    let o = cpe(&["check-properness", "--loss", "hinge", "--grid", "1e-2"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("link ")).count(), 3);
    assert!(!text.contains("strictly proper = true"));
    assert!(text.contains("cover = true, disjoint = false"));
}

#[test]
fn fit_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let problem = config("three_point.json");
    let o = cpe(&["fit", "--problem", problem.to_str().unwrap(), "--loss", "sq", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let w: Vec<f64> = serde_json::from_value(model["weights"].clone()).unwrap();
    assert!((w[0] - 19.0 / 39.0).abs() < 1e-9 && (w[1] + 17.0 / 39.0).abs() < 1e-9, "{w:?}");
    assert_eq!(model["loss"], "sq");
    assert_eq!(model["feature_map"], "affine");
}

#[test]
fn sampled_fits_are_reproducible() {
    let problem = config("reference_log.json");
    let run = || {
        stdout(&cpe(&["fit", "--problem", problem.to_str().unwrap(), "--loss", "log", "--sample", "500", "--seed", "3"]))
    };
    let first = run();
    assert!(first.contains("sample = 500 (seed 3"));
    assert_eq!(first, run());
}

#[test]
fn convergence_run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("conv.csv");
    let cfg = config("converge_log.json");
    let o = cpe(&["converge", "--config", cfg.to_str().unwrap(), "--reps", "20", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("repetitions = 20 (root seed 42)"));
    assert!(text.contains("markov violations = 0"));
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,eps,mean_tail,median_tail,q90_tail,mean_l1,mean_excess_risk"));
    assert_eq!(lines.count(), 9);
}

#[test]
fn misspecified_problem_needs_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config("converge_misspecified.json")).unwrap()).unwrap();
    cfg["misspecified"] = false.into();
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let o = cpe(&["converge", "--config", cfg_path.to_str().unwrap(), "--reps", "20"]);
    assert_eq!(code(&o), 1);
    let o = cpe(&["converge", "--config", cfg_path.to_str().unwrap(), "--reps", "20", "--misspecified"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("floor check = PASS"));
}

#[test]
fn misspec_constant_model_projects_to_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("misspec.json");
    let problem = config("misspecified.json");
    for loss in ["sq", "log"] {
        let o = cpe(&["misspec", "--problem", problem.to_str().unwrap(), "--loss", loss, "--out", path.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for p in report["points"].as_array().unwrap() {
            assert!((p["eta_hat"].as_f64().unwrap() - 0.5).abs() < 1e-6);
        }
        assert_eq!(report["agrees"], true);
    }
}

#[test]
fn repro_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("repro.csv");
    let o = cpe(&["repro-sec65", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(&path).unwrap().lines().count() > 1);
}
