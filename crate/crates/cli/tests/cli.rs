//! End-to-end tests of the command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qlpen::lab::Scenario;
use qlpen_cli::{exit, grid_points, parse_scenario, Axis};
use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn qlpen(args: &[&str], out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qlpen"));
    cmd.args(args).arg("--out").arg(out);
    match threads {
        Some(t) => cmd.env("QLPEN_THREADS", t),
        None => cmd.env_remove("QLPEN_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"))
}

#[test]
fn equality_run_is_ok_and_saturates() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlpen(&["run", scenario("equality.toml").to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["schema"], "qlpen.run");
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["status"], "OK");
    assert!(s["report"]["gap"].as_f64().unwrap().abs() < 1e-8);
    assert_eq!(s["pipeline"]["chain_holds"], true);
    for f in ["checklist.csv", "chain.csv", "schedule.csv", "trace.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn flux_failure_is_hypothesis_fail_not_critical() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlpen(&["run", scenario("variant-a-flux-fail.toml").to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&o), exit::HYPOTHESIS_FAIL);
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["status"], "HYPOTHESIS_FAIL");
    assert!(s["pipeline"].is_null());
    let (h, rows) = csv_rows(&dir.path().join("checklist.csv"));
    let flux = rows.iter().find(|r| r[0] == "flux_mean_curvature").unwrap();
    assert_eq!(flux[col(&h, "pass")], "false");
}

#[test]
fn shipped_scenarios_have_expected_status() {
    for (file, status) in [
        ("equality.toml", "OK"),
        ("equality-family.toml", "OK"),
        ("rn-regression.toml", "OK"),
        ("dust-shell-b.toml", "OK"),
        ("zero-mass.toml", "OK"),
        ("corner-a.json", "OK"),
        ("variant-a-flux-fail.toml", "HYPOTHESIS_FAIL"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        qlpen(&["run", scenario(file).to_str().unwrap()], dir.path(), None);
        let s = json(&dir.path().join("summary.json"));
        assert_eq!(s["status"], status, "{file}: {}", s["error"]);
    }
}

#[test]
fn regression_run_is_bitwise_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let path = scenario("rn-regression.toml");
    assert_eq!(code(&qlpen(&["run", path.to_str().unwrap()], a.path(), Some("1"))), exit::OK);
    assert_eq!(code(&qlpen(&["run", path.to_str().unwrap(), "--seedless"], b.path(), Some("4"))), exit::OK);
    for f in ["summary.json", "checklist.csv", "chain.csv", "schedule.csv", "trace.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn equality_sweep_rows_are_ordered_and_saturate() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "sweep",
        scenario("equality-family.toml").to_str().unwrap(),
        "--axis",
        "mbar=0.5:2:5",
        "--axis",
        "qbar=-0.45:0.45:5",
    ]
    .map(String::from);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(code(&qlpen(&args, a.path(), Some("1"))), exit::OK);
    assert_eq!(code(&qlpen(&args, b.path(), Some("3"))), exit::OK);
    let (csv_a, csv_b) = (fs::read(a.path().join("sweep.csv")).unwrap(), fs::read(b.path().join("sweep.csv")).unwrap());
    assert_eq!(csv_a, csv_b, "row order must not depend on the worker count");
    let (h, rows) = csv_rows(&a.path().join("sweep.csv"));
    assert_eq!(rows.len(), 25);
    let (im, iq, ig) = (col(&h, "mbar"), col(&h, "qbar"), col(&h, "gap"));
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r[0], k.to_string());
        let (m, q): (f64, f64) = (r[im].parse().unwrap(), r[iq].parse().unwrap());
        assert!((m - (0.5 + 1.5 * (k / 5) as f64 / 4.0)).abs() < 1e-12);
        assert!((q - (-0.45 + 0.9 * (k % 5) as f64 / 4.0)).abs() < 1e-12);
        assert!(r[ig].parse::<f64>().unwrap().abs() < 1e-8);
    }
    for name in ["lhs", "rhs", "gap", "worst_margin", "m_adm"] {
        col(&h, &format!("{name}_tol"));
    }
}

#[test]
fn delta_sweep_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlpen(
        &["sweep", scenario("rn-regression.toml").to_str().unwrap(), "--axis", "delta=1e-1:1e-3:3:log", "--pipeline"],
        dir.path(),
        None,
    );
    assert_eq!(code(&o), exit::OK);
    let s = json(&dir.path().join("sweep.json"));
    let fit = &s["convergence"];
    // At least first order; the glued family converges faster.
    assert!(fit["observed_order"].as_f64().unwrap() >= 0.9, "{fit}");
    let rows = s["rows"].as_array().unwrap();
    let m: Vec<f64> = rows.iter().map(|r| r["m_adm"].as_f64().unwrap()).collect();
    assert!((m[2] - 1.2).abs() < 1e-7);
    assert!((m[0] - 1.2).abs() > (m[1] - 1.2).abs());
    assert_eq!(rows[1]["params"][0].as_f64().unwrap(), 1e-2);
}

#[test]
fn failed_rows_are_recorded_and_sweep_continues() {
    let dir = tempfile::tempdir().unwrap();
    // r_b = 1 lies inside the interior horizon (r₊ ≈ 2.13).
    let o = qlpen(&["sweep", scenario("rn-regression.toml").to_str().unwrap(), "--axis", "r_b=1:5:3"], dir.path(), None);
    assert_eq!(code(&o), exit::CONFIG);
    let s = json(&dir.path().join("sweep.json"));
    let rows = s["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["status"], "CONFIG_ERROR");
    assert!(rows[0]["error"]["message"].as_str().unwrap().contains("horizon"));
    assert_eq!(rows[1]["status"], "OK");
    assert_eq!(rows[2]["status"], "OK");
    assert_eq!(s["counts"]["errors"], 1);
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let eq = scenario("equality.toml");
    let eq = eq.to_str().unwrap();
    for axis in ["mbar=1:2:0", "nope=1:2:3", "mbar=1:2", "mbar=a:2:3", "mbar=-1:2:3:log"] {
        let o = qlpen(&["sweep", eq, "--axis", axis], dir.path(), None);
        assert_eq!(code(&o), exit::CONFIG, "{axis}");
    }
    let o = qlpen(&["sweep", eq, "--axis", "mbar=1:2:2", "--axis", "mbar=1:2:2"], dir.path(), None);
    assert_eq!(code(&o), exit::CONFIG);
    let o = qlpen(&["sweep", eq, "--axis", "mbar=1:2:2"], dir.path(), Some("0"));
    assert_eq!(code(&o), exit::CONFIG);
    assert!(String::from_utf8_lossy(&o.stderr).contains("QLPEN_THREADS"));
    let o = qlpen(&["run", eq, "--grid", "7"], dir.path(), None);
    assert_eq!(code(&o), exit::CONFIG);
    let o = qlpen(&["run", eq, "--tol=-1"], dir.path(), None);
    assert_eq!(code(&o), exit::CONFIG);
    let o = qlpen(&["run", "/nonexistent/scenario.toml"], dir.path(), None);
    assert_eq!(code(&o), exit::CONFIG);
    let o = qlpen(&["frobnicate"], dir.path(), None);
    assert_eq!(code(&o), exit::USAGE);
}

#[test]
fn parse_errors_carry_line_information() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("bad.toml");
    fs::write(&toml_path, "name = \"x\"\nvariant = \"B\"\n\n[reference]\nmbar = 1.0\nqbar = oops\n").unwrap();
    let o = qlpen(&["run", toml_path.to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&o), exit::CONFIG);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:6:"), "{err}");

    let json_path = dir.path().join("bad.json");
    fs::write(&json_path, "{\n  \"name\": \"x\",\n  \"variant\": \"B\",\n  \"reference\": {\"mbar\": 1, \"qbar\": }\n}\n").unwrap();
    let o = qlpen(&["run", json_path.to_str().unwrap()], dir.path(), None);
    assert_eq!(code(&o), exit::CONFIG);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json:4:"));

    let unknown = "name = \"x\"\nvariant = \"B\"\ncolour = 3\n";
    match parse_scenario(unknown, false, Path::new("u.toml")) {
        Err(qlpen_cli::CliError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn stage_failures_are_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("rn-regression.toml")).unwrap().replace("variant = \"B\"", "variant = \"B\"\nu0 = 1.0");
    let path = dir.path().join("u1.toml");
    fs::write(&path, text).unwrap();
    let o = qlpen(&["run", path.to_str().unwrap()], &dir.path().join("out"), None);
    assert_eq!(code(&o), exit::STAGE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[stage corner]"));
    let s = json(&dir.path().join("out/summary.json"));
    assert_eq!(s["status"], "STAGE_FAILURE");
    assert_eq!(s["error"]["stage"], "corner");
    // The inequality itself was still evaluated.
    assert!(s["report"]["gap"].as_f64().unwrap() > 0.0);
}

#[test]
fn energy_violating_interior_is_out_of_scope() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("dust-shell-b.toml")).unwrap().replace("density = 0.01", "density = -0.01")
        .replace("q_b = 0.6", "q_b = 0.8");
    let path = dir.path().join("rej.toml");
    fs::write(&path, text).unwrap();
    let o = qlpen(&["run", path.to_str().unwrap()], &dir.path().join("out"), None);
    assert_eq!(code(&o), exit::HYPOTHESIS_FAIL);
    let s = json(&dir.path().join("out/summary.json"));
    assert_eq!(s["error"]["kind"], "interior_rejected");
}

#[test]
fn corner_demo_reports_spikes() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlpen(&["corner-demo"], dir.path(), None);
    assert_eq!(code(&o), exit::OK);
    let (h, rows) = csv_rows(&dir.path().join("corner.csv"));
    assert_eq!(rows.len(), 3);
    let e = col(&h, "curvature_rel_err");
    let errs: Vec<f64> = rows.iter().map(|r| r[e].parse().unwrap()).collect();
    assert!(errs[2] < errs[1] && errs[1] < errs[0] && errs[2] < 1e-6, "{errs:?}");
    // Reversed orientation violates the variant-A corner condition.
    let o = qlpen(
        &["corner-demo", "--inner-mass", "1.2", "--outer-mass", "1.0", "--outer-charge", "0.5", "--variant", "A"],
        dir.path(),
        None,
    );
    assert_eq!(code(&o), exit::HYPOTHESIS_FAIL);
}

#[test]
fn extension_trace_limit() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlpen(&["extension-trace"], dir.path(), None);
    assert_eq!(code(&o), exit::OK);
    let s = json(&dir.path().join("extension.json"));
    assert!(s["limit_gap"].as_f64().unwrap() < 1e-3);
    assert_eq!(s["monotonicity_violations"], 0);
    assert!(s["areal_radius_max"].as_f64().unwrap() >= 3000.0);
    let (h, rows) = csv_rows(&dir.path().join("trace.csv"));
    let t = col(&h, "trace");
    let v: Vec<f64> = rows.iter().map(|r| r[t].parse().unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn axis_grid_is_lexicographic() {
    let a = Axis::parse("mbar=1:2:2").unwrap();
    let b = Axis::parse("qbar=0:0.5:3").unwrap();
    let pts = grid_points(&[a, b]);
    assert_eq!(pts.len(), 6);
    assert_eq!(pts[0], vec![1.0, 0.0]);
    assert_eq!(pts[2], vec![1.0, 0.5]);
    assert_eq!(pts[3], vec![2.0, 0.0]);
    let l = Axis::parse("delta=1e-1:1e-3:3:log").unwrap().values();
    assert_eq!(l, vec![1e-1, 1e-2, 1e-3]);
    assert_eq!(Axis::parse("u0=1.5:9:1").unwrap().values(), vec![1.5]);
}

#[test]
fn scenario_round_trips_through_toml_and_json() {
    for sc in [Scenario::rn_regression(), Scenario::dust_shell_b(), Scenario::zero_mass()] {
        let t = toml::to_string(&sc).unwrap();
        assert_eq!(parse_scenario(&t, false, Path::new("x.toml")).unwrap(), sc);
        let j = serde_json::to_string(&sc).unwrap();
        assert_eq!(parse_scenario(&j, true, Path::new("x.json")).unwrap(), sc);
    }
}
