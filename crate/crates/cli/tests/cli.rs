use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_impulsive"));
    c.env_remove("IMPULSIVE_OUT_DIR");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn bundled_scenarios_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (file, expected) in [
        ("lin_contract_iiss.json", 0),
        ("double_jump_falsify.json", 2),
        ("pure_jump_lift.json", 0),
        ("bilinear_eps_delta.json", 0),
    ] {
        let out_dir = dir.path().join(file);
        let out = bin()
            .arg("run")
            .arg(scenario(file))
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(expected),
            "{file}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out_dir.join("report.json").exists(), "{file}");
    }
}

#[test]
fn scenario_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for file in ["lin_contract_iiss.json", "double_jump_falsify.json"] {
        let mut reports = Vec::new();
        for run in ["a", "b"] {
            let out_dir = dir.path().join(run).join(file);
            bin().arg("run").arg(scenario(file)).arg("--out").arg(&out_dir).output().unwrap();
            reports.push(fs::read(out_dir.join("report.json")).unwrap());
        }
        assert_eq!(reports[0], reports[1], "{file}");
    }
}

#[test]
fn falsify_writes_replayable_witness() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = bin()
        .args([
            "--seed",
            "9",
            "falsify",
            "--system",
            "double-jump",
            "--family",
            r#"{"name": "periodic", "period": 0.1}"#,
            "--cert",
            r#"{"type": "guas", "beta": {"kind": "exp_decay", "lambda": 0.1}}"#,
            "--budget",
            "20",
            "--out",
        ])
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["verdict"], "violated");
    assert!(v["witness"]["lhs"].as_f64().unwrap() > v["witness"]["rhs"].as_f64().unwrap());
    let csv = fs::read_to_string(report.with_extension("witness.csv")).unwrap();
    assert!(csv.starts_with("t,x_1,is_post_jump"));
}

#[test]
fn check_passes_on_contracting_system() {
    let out = bin()
        .args([
            "check",
            "--system",
            "lin-contract",
            "--family",
            r#"{"name": "periodic", "period": 1.0}"#,
            "--cert",
            r#"{"type": "iiss", "alpha": {"kind": "identity"},
                "beta": {"kind": "exp_decay", "lambda": 0.6931471805599453},
                "rho1": {"kind": "identity"}, "rho2": {"kind": "identity"}}"#,
            "--budget",
            "40",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_matches_closed_form() {
    let out = run_ok(&[
        "simulate",
        "--system",
        "pure-jump",
        "--x0",
        "8",
        "--horizon",
        "3.5",
        "--step",
        "0.5",
        "--sigma",
        "[1, 2, 3]",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    assert_eq!(last, "3.5,1,0");
    assert_eq!(text.lines().filter(|l| l.ends_with(",1")).count(), 3);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    bin()
        .env("IMPULSIVE_OUT_DIR", dir.path())
        .args(["examples", "export", "bilinear"])
        .output()
        .unwrap();
    let text = fs::read_to_string(dir.path().join("bilinear.json")).unwrap();
    assert!(text.contains("x1 * u1"));
}

#[test]
fn gronwall_bound_value() {
    let out = run_ok(&["gronwall", "--p", "1", "--q1", "0.5", "--q2", "1", "--t", "2", "--sigma", "[1.0]"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let expected = 2.0 * 1f64.exp();
    assert!((v["bound"].as_f64().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn gronwall_verifies_simulated_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("y.csv");
    // y' = 0.5 y, y(τ) = 2 y(τ⁻): equality case of the bound.
    let sys = dir.path().join("sys.json");
    fs::write(
        &sys,
        r#"{"name": "grow", "dim_x": 1, "dim_u": 0, "flow": ["0.5 * x1"], "jump": ["x1"]}"#,
    )
    .unwrap();
    run_ok(&[
        "simulate",
        "--system",
        sys.to_str().unwrap(),
        "--x0",
        "1",
        "--horizon",
        "3",
        "--sigma",
        "[1, 2]",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let out = run_ok(&[
        "gronwall", "--p", "1", "--q1", "0.5", "--q2", "1", "--t", "3", "--sigma", "[1, 2]", "--trajectory",
        csv.to_str().unwrap(),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verification"]["pass"], true, "{v}");
}

#[test]
fn examples_list_names_all() {
    let out = run_ok(&["examples", "list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["LIN-CONTRACT", "PURE-JUMP", "BILINEAR", "DOUBLE-JUMP", "ZERO"] {
        assert!(text.contains(name));
    }
}

#[test]
fn bad_config_reports_location() {
    let out = bin()
        .args(["check", "--system", "zero", "--family", r#"{"name": "empty"}"#, "--cert", "{\n  \"type\": \"guas\",\n  \"beta\": ]"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}
