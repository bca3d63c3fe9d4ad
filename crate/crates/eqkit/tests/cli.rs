//! End-to-end tests of the `eqkit` binary: exit codes, report contents,
//! schema conformance, and byte stability.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn eqkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(output: &Output) -> Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

/// Minimal JSON-schema checker covering the subset the shipped schema uses:
/// `type` (string or array), `properties`, `required`, `items`, `enum`,
/// `additionalProperties: false`.
fn validate(schema: &Value, instance: &Value, path: &str) -> Result<(), String> {
    if let Some(types) = schema.get("type") {
        let names: Vec<&str> = match types {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(|v| v.as_str()).collect(),
            _ => return Err(format!("{path}: malformed `type`")),
        };
        let matches = names.iter().any(|t| match *t {
            "object" => instance.is_object(),
            "array" => instance.is_array(),
            "string" => instance.is_string(),
            "number" => instance.is_number(),
            "integer" => instance.is_i64() || instance.is_u64(),
            "boolean" => instance.is_boolean(),
            "null" => instance.is_null(),
            _ => false,
        });
        if !matches {
            return Err(format!("{path}: {instance} does not match type {names:?}"));
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(instance) {
            return Err(format!("{path}: {instance} not in enum"));
        }
    }
    if let Some(obj) = instance.as_object() {
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    return Err(format!("{path}: missing required key `{key}`"));
                }
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        if let Some(props) = props {
            for (key, value) in obj {
                match props.get(key) {
                    Some(sub) => validate(sub, value, &format!("{path}.{key}"))?,
                    None => {
                        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                            return Err(format!("{path}: unexpected key `{key}`"));
                        }
                    }
                }
            }
        }
    }
    if let (Some(items), Some(array)) = (schema.get("items"), instance.as_array()) {
        for (i, element) in array.iter().enumerate() {
            validate(items, element, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

fn assert_schema(report: &Value) {
    let schema_text =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json"))
            .expect("schema file ships with the crate");
    let schema: Value = serde_json::from_str(&schema_text).unwrap();
    if let Err(e) = validate(&schema, report, "$") {
        panic!("report violates schema: {e}");
    }
}

#[test]
fn classify_disk_reports_rotation_family() {
    let out = eqkit(&[
        "classify",
        "--domain",
        fixture("disk.toml").to_str().unwrap(),
        "--bc",
        "specular",
        "--samples",
        "256",
        "--seed",
        "42",
        "--tol",
        "1e-7",
    ]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_schema(&report);
    let classify = &report["classify"];
    assert_eq!(classify["null_dim"], 1);
    assert_eq!(classify["classification"]["case"], "DiskOrAnnulus");
    assert!(classify["forward_check_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(classify["basis"].as_array().unwrap().len(), 1);
    assert_eq!(classify["basis"][0].as_array().unwrap().len(), 7);
}

#[test]
fn classify_ellipse_reports_global_only() {
    let out = eqkit(&[
        "classify",
        "--domain",
        fixture("ellipse.toml").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_schema(&report);
    assert_eq!(report["classify"]["null_dim"], 0);
    assert_eq!(report["classify"]["classification"]["case"], "GlobalOnly");
    assert!(report["classify"]["gap_ratio"].is_null());
}

#[test]
fn classify_is_byte_stable() {
    let disk = fixture("disk.toml");
    let args = [
        "classify",
        "--domain",
        disk.to_str().unwrap(),
        "--seed",
        "7",
    ];
    let a = eqkit(&args);
    let b = eqkit(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn classify_dump_matrix_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("rows.csv");
    let out = eqkit(&[
        "classify",
        "--domain",
        fixture("disk.toml").to_str().unwrap(),
        "--samples",
        "16",
        "--dump-matrix",
        matrix.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let text = std::fs::read_to_string(&matrix).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    // specular: two rows per sample, theta length 7
    assert_eq!(rows.len(), 32);
    assert_eq!(rows[0].split(',').count(), 7);
}

#[test]
fn verify_global_everywhere() {
    for (domain, bc) in [
        ("disk.toml", "specular"),
        ("disk.toml", "bounce_back"),
        ("ellipse.toml", "specular"),
        ("ellipse.toml", "bounce_back"),
    ] {
        let out = eqkit(&[
            "verify",
            "--params",
            fixture("global_maxwellian.toml").to_str().unwrap(),
            "--domain",
            fixture(domain).to_str().unwrap(),
            "--bc",
            bc,
        ]);
        assert_eq!(exit_code(&out), 0, "{domain} {bc}");
        let report = stdout_json(&out);
        assert_schema(&report);
        assert_eq!(report["verify"]["admissible"], true);
    }
}

#[test]
fn verify_rotating_state_disk_yes_ellipse_no() {
    let ok = eqkit(&[
        "verify",
        "--params",
        fixture("rotating_disk.toml").to_str().unwrap(),
        "--domain",
        fixture("disk.toml").to_str().unwrap(),
        "--bc",
        "specular",
    ]);
    assert_eq!(exit_code(&ok), 0);
    let report = stdout_json(&ok);
    assert_eq!(report["verify"]["admissible"], true);
    assert!(report["verify"]["transport_residual_max"].as_f64().unwrap() <= 1e-8);

    let rejected = eqkit(&[
        "verify",
        "--params",
        fixture("rotating_disk.toml").to_str().unwrap(),
        "--domain",
        fixture("ellipse.toml").to_str().unwrap(),
        "--bc",
        "specular",
    ]);
    assert_eq!(exit_code(&rejected), 2, "not-admissible must exit 2");
    let report = stdout_json(&rejected);
    assert_schema(&report);
    assert_eq!(report["verify"]["admissible"], false);
}

#[test]
fn trace_emits_helix_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("curve.csv");
    let out = eqkit(&[
        "trace",
        "--field",
        fixture("helix_field.toml").to_str().unwrap(),
        "--x0",
        "1,0,0",
        "--t-end",
        "10",
        "--steps",
        "1000",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,x3");
    let last = lines.last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cols.len(), 4);
    assert!((cols[0] - 10.0).abs() <= 1e-12);
    assert!((cols[1] - 10.0f64.cos()).abs() <= 1e-10);
    assert!((cols[2] - 10.0f64.sin()).abs() <= 1e-10);
    assert!((cols[3] - 10.0).abs() <= 1e-10);
}

#[test]
fn factor_reports_closed_form_values() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.toml");
    std::fs::write(
        &params,
        "dim = 2\nr0 = 1.0\nalpha = 1.0\ngamma = 1.0\nw1 = [1.0, 0.0]\nw2 = [0.0, 1.0]\n",
    )
    .unwrap();
    let out = eqkit(&[
        "factor",
        "--params",
        params.to_str().unwrap(),
        "--t",
        "1.0",
        "--x",
        "0,0",
    ]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_schema(&report);
    let factor = &report["factor"];
    // a(1) = 1 + 0 + 1 = 2; C(1) = (w1 + w2)/2 = (0.5, 0.5); u(1, 0) = C(1)
    assert!((factor["a"].as_f64().unwrap() - 2.0).abs() <= 1e-15);
    assert!((factor["u"][0].as_f64().unwrap() - 0.5).abs() <= 1e-15);
    assert!((factor["u"][1].as_f64().unwrap() - 0.5).abs() <= 1e-15);
    let rho = factor["rho"].as_f64().unwrap();
    let rho_formula = factor["rho_formula"].as_f64().unwrap();
    assert!((rho - rho_formula).abs() <= 1e-10 * rho.abs());
}

#[test]
fn factor_outside_window_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.toml");
    // a(t) = 1 - t^2 is positive only on (-1, 1)
    std::fs::write(&params, "dim = 2\nr0 = 1.0\nalpha = -1.0\ngamma = 1.0\n").unwrap();
    let out = eqkit(&[
        "factor",
        "--params",
        params.to_str().unwrap(),
        "--t",
        "2.0",
        "--x",
        "0,0",
    ]);
    assert_eq!(exit_code(&out), 1);
    let report = stdout_json(&out);
    assert!(report["error"]
        .as_str()
        .unwrap()
        .contains("positivity window"));
}

#[test]
fn simulate_small_run_produces_report() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("sim.json");
    let out = eqkit(&[
        "simulate",
        "--params",
        fixture("global_maxwellian.toml").to_str().unwrap(),
        "--domain",
        fixture("disk.toml").to_str().unwrap(),
        "--bc",
        "specular",
        "-N",
        "2000",
        "--t-end",
        "1.0",
        "--seed",
        "11",
        "--out",
        json_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_schema(&report);
    let sim = &report["simulate"];
    assert_eq!(sim["particles"], 2000);
    assert_eq!(sim["conservation_violations"], 0);
    for snapshot in sim["moments"].as_array().unwrap() {
        assert_eq!(snapshot["mass"].as_f64().unwrap(), 1.0);
    }
    // checkpoints default to t_end/2 and t_end
    assert_eq!(sim["moments"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_unbounded_domain_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let domain = dir.path().join("halfplane.toml");
    std::fs::write(
        &domain,
        "dim = 2\nkind = \"half_space\"\nnormal = [0.0, 1.0]\noffset = 1.0\n",
    )
    .unwrap();
    let out = eqkit(&[
        "simulate",
        "--params",
        fixture("global_maxwellian.toml").to_str().unwrap(),
        "--domain",
        domain.to_str().unwrap(),
        "-N",
        "100",
    ]);
    assert_eq!(exit_code(&out), 1);
    let report = stdout_json(&out);
    assert!(report["error"].as_str().unwrap().contains("unbounded"));
}

#[test]
fn missing_file_and_bad_arguments_exit_one() {
    let out = eqkit(&["classify", "--domain", "/nonexistent/d.toml"]);
    assert_eq!(exit_code(&out), 1);
    let report = stdout_json(&out);
    assert!(report["error"].is_string());

    let out = eqkit(&[
        "classify",
        "--domain",
        fixture("disk.toml").to_str().unwrap(),
        "--samples",
        "4",
    ]);
    assert_eq!(exit_code(&out), 1);
    let report = stdout_json(&out);
    assert!(report["error"].as_str().unwrap().contains("at least 8"));
}

#[test]
fn classify_helical_fixture_recovers_pitch() {
    let out = eqkit(&[
        "classify",
        "--domain",
        fixture("helical_surface.toml").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_schema(&report);
    assert_eq!(report["classify"]["null_dim"], 1);
    assert_eq!(
        report["classify"]["classification"]["case"],
        "HelicalSurface"
    );
    let pitch = report["classify"]["classification"]["detected"]["pitch"]
        .as_f64()
        .unwrap();
    assert!((pitch.abs() - 0.3).abs() <= 1e-6, "pitch {pitch}");
}

#[test]
fn json_floats_round_trip_exactly() {
    let out = eqkit(&[
        "classify",
        "--domain",
        fixture("disk.toml").to_str().unwrap(),
        "--samples",
        "64",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    // every float is printed in scientific notation with 16 fractional
    // digits; reparsing and reprinting must be the identity
    let v: Value = serde_json::from_str(&text).unwrap();
    let sv = v["classify"]["singular_values"][0].as_f64().unwrap();
    assert!(text.contains(&format!("{sv:.16e}")));
}
