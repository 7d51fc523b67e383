use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const COMB_13: &str = r#"
[device]
kappa_per_us = "matched"
gamma_r_per_us = 1e-3

[device.comb]
n = 5
spacing_mhz = 13
g_mhz = 13
gamma_per_us = 1e-3
"#;

const COMB_12: &str = r#"
[device]
kappa_per_us = "matched"
gamma_r_per_us = 1e-3

[device.comb]
n = 5
spacing_mhz = 12
g_mhz = 12
gamma_per_us = 1e-3
"#;

fn run(dir: &TempDir, command: &str, scenario: &str) -> (Output, PathBuf) {
    let file = dir.path().join(format!("{command}.toml"));
    fs::write(&file, scenario).unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_combmem"))
        .args([command, "--scenario"])
        .arg(&file)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (o, out)
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn check_schema(name: &str, v: &Value) {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    let schema = json(&schema_path);
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errs: Vec<String> = validator.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errs.is_empty(), "{name}: {errs:?}");
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn simulate_reports_echo_at_comb_period() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(&dir, "simulate", &format!("{COMB_13}\n[simulate]\n"));
    ok(&o);
    let line = String::from_utf8(o.stdout).unwrap();
    assert!(line.starts_with("simulate: eta1="), "{line}");
    assert_eq!(line.lines().count(), 1);

    assert_eq!(header(&out.join("trace.csv")), "t_us,re_in,im_in,re_out,im_out,p_out");
    let v = json(&out.join("echoes.json"));
    check_schema("echoes", &v);
    let first = &v["events"][0];
    assert_eq!(first["k"], 1);
    let delay = first["peak_time_us"].as_f64().unwrap() - v["pulse_center_us"].as_f64().unwrap();
    assert!(
        (delay - 1.0 / 13.0).abs() <= v["dt_us"].as_f64().unwrap(),
        "delay {delay}"
    );
    assert!(first["efficiency"].as_f64().unwrap() > 0.9);
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let text = format!("{COMB_13}\n[simulate]\n");
    let (oa, out_a) = run(&a, "simulate", &text);
    let (ob, out_b) = run(&b, "simulate", &text);
    ok(&oa);
    ok(&ob);
    for name in ["trace.csv", "echoes.json"] {
        assert_eq!(
            fs::read(out_a.join(name)).unwrap(),
            fs::read(out_b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn match_writes_schema_fields() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(&dir, "match", &format!("{COMB_13}\n[match]\n"));
    ok(&o);
    let v = json(&out.join("match.json"));
    check_schema("match", &v);
    for key in [
        "kappa_opt",
        "kappa_analytic",
        "eta_opt",
        "reflected_fraction",
        "evaluations",
        "unimodal",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn missing_kappa_is_rejected_without_artifacts() {
    let dir = TempDir::new().unwrap();
    let text = COMB_13.replace("kappa_per_us = \"matched\"\n", "");
    let (o, out) = run(&dir, "simulate", &format!("{text}\n[simulate]\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("device.kappa_per_us"));
    assert!(!out.exists());
}

#[test]
fn every_schema_violation_is_listed() {
    let dir = TempDir::new().unwrap();
    let text = "[device]\nkappa_per_us = -1\n[device.comb]\nn = 5\nspacing_mhz = 13\ng_mhz = 13\n[pulse]\nfwhm_us = -2\n[sweep]\n";
    let (o, out) = run(&dir, "sweep", text);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for needle in ["device.common.kappa", "pulse.", "sweep.deltas_mhz: missing"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
    assert!(!out.exists());
}

#[test]
fn command_must_match_scenario() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run(&dir, "match", &format!("{COMB_13}\n[simulate]\n"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unresolved_step_is_a_numerical_error() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(
        &dir,
        "simulate",
        &format!("{COMB_13}\n[grid]\ndt_us = 0.01\n[simulate]\n"),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical error"));
    assert!(!out.exists());
}

#[test]
fn sweep_csv_layout() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(&dir, "sweep", &format!("{COMB_13}\n[sweep]\ndeltas_mhz = [6, 13]\n"));
    ok(&o);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "delta_mhz,echo_time_ns,eta_first,eta_analytic,reflected_fraction"
    );
    assert_eq!(lines.len(), 3);
    let t13: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((t13 - 1e3 / 13.0).abs() < 0.2, "{t13}");
}

#[test]
fn spectrum_csv_layout() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(&dir, "spectrum", &format!("{COMB_13}\n[spectrum]\npoints = 101\n"));
    ok(&o);
    let text = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "omega_rad_per_us,re_r,im_r,abs_r2");
    assert_eq!(text.lines().count(), 102);
}

#[test]
fn compare_distinguishes_matched_from_open() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(&dir, "compare", &format!("{COMB_12}\n[compare]\n"));
    ok(&o);
    let v = json(&out.join("comparison.json"));
    check_schema("comparison", &v);
    assert_eq!(v["open_multiplier"], 10.0);
    assert_eq!(v["matched_second_echo_smaller"], true);
    assert_eq!(v["matched_reflection_smaller"], true);
    assert!(out.join("trace_matched.csv").exists() && out.join("trace_open.csv").exists());
}

#[test]
fn compare_with_unit_multiplier_pairs_identical_traces() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(&dir, "compare", &format!("{COMB_12}\n[compare]\nopen_multiplier = 1\n"));
    ok(&o);
    assert_eq!(
        fs::read(out.join("trace_matched.csv")).unwrap(),
        fs::read(out.join("trace_open.csv")).unwrap()
    );
}

#[test]
fn fit_reaches_target() {
    let dir = TempDir::new().unwrap();
    let text = format!("{COMB_13}\n[fit]\ntarget_eta = 0.5\ntarget_echo_time_ns = 76.923076923\nfree = [\"g\"]\n");
    let (o, out) = run(&dir, "fit", &text);
    ok(&o);
    let v = json(&out.join("fit.json"));
    check_schema("fit", &v);
    assert!(v["residual"].as_f64().unwrap() < 1e-3, "{v}");
    assert_eq!(v["converged"], true);
}
