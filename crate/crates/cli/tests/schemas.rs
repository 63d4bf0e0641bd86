//! Validate every JSON artifact the binary emits against the schema files
//! shipped under /schemas, using a small built-in checker covering the
//! subset of JSON Schema those files use.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn load_schema(name: &str) -> Value {
    let path = schema_dir().join(name);
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| {
        panic!("cannot read {}: {e}", path.display());
    }))
    .unwrap_or_else(|e| panic!("{name} is not valid JSON: {e}"))
}

fn type_matches(expected: &str, value: &Value) -> bool {
    match expected {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "number" => value.is_number(),
        "integer" => value.as_f64().map(|v| v.fract() == 0.0).unwrap_or(false),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        other => panic!("unsupported type keyword '{other}'"),
    }
}

/// Check `value` against the subset of JSON Schema used in /schemas:
/// type (string or union), const, enum, required, properties, items,
/// minItems, minimum, exclusiveMinimum and the one fixed hex pattern.
fn validate(schema: &Value, value: &Value, path: &str, errors: &mut Vec<String>) {
    if let Some(t) = schema.get("type") {
        let ok = match t {
            Value::String(s) => type_matches(s, value),
            Value::Array(options) => options
                .iter()
                .any(|s| type_matches(s.as_str().unwrap(), value)),
            _ => panic!("bad type keyword at {path}"),
        };
        if !ok {
            errors.push(format!("{path}: expected type {t}, got {value}"));
            return;
        }
    }
    if let Some(c) = schema.get("const") {
        if c != value {
            errors.push(format!("{path}: expected const {c}, got {value}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            errors.push(format!("{path}: {value} not in enum {options:?}"));
        }
    }
    if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
        if let Some(v) = value.as_f64() {
            if v < min {
                errors.push(format!("{path}: {v} below minimum {min}"));
            }
        }
    }
    if let Some(min) = schema.get("exclusiveMinimum").and_then(Value::as_f64) {
        if let Some(v) = value.as_f64() {
            if v <= min {
                errors.push(format!("{path}: {v} not above {min}"));
            }
        }
    }
    if let Some(pattern) = schema.get("pattern").and_then(Value::as_str) {
        if pattern == "^[0-9a-f]{64}$" {
            let ok = value
                .as_str()
                .map(|s| s.len() == 64 && s.chars().all(|c| c.is_ascii_hexdigit()))
                .unwrap_or(false);
            if !ok {
                errors.push(format!("{path}: does not match {pattern}"));
            }
        }
    }
    if let Some(obj) = value.as_object() {
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required {
                let key = key.as_str().unwrap();
                if !obj.contains_key(key) {
                    errors.push(format!("{path}: missing required key '{key}'"));
                }
            }
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (key, sub) in props {
                if let Some(v) = obj.get(key) {
                    validate(sub, v, &format!("{path}.{key}"), errors);
                }
            }
        }
    }
    if let Some(arr) = value.as_array() {
        if let Some(min_items) = schema.get("minItems").and_then(Value::as_u64) {
            if (arr.len() as u64) < min_items {
                errors.push(format!("{path}: fewer than {min_items} items"));
            }
        }
        if let Some(items) = schema.get("items") {
            for (i, v) in arr.iter().enumerate() {
                validate(items, v, &format!("{path}[{i}]"), errors);
            }
        }
    }
}

fn assert_valid(schema_name: &str, value: &Value) {
    let schema = load_schema(schema_name);
    let mut errors = Vec::new();
    validate(&schema, value, "$", &mut errors);
    assert!(
        errors.is_empty(),
        "{schema_name} violations:\n{}",
        errors.join("\n")
    );
}

fn run_json(args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_irs"))
        .args(args)
        .output()
        .expect("binary runs");
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn emitted_artifacts_validate_against_shipped_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("scm.json");
    let config = r#"{
        "confounders": [{"cardinality": 2, "prior": [0.5, 0.5]}],
        "factors": [
            {"cardinality": 2, "parents": [0], "table": [[0.9, 0.1], [0.1, 0.9]]},
            {"cardinality": 3, "table": [[0.3333333333333333, 0.3333333333333333, 0.3333333333333334]]}
        ],
        "encoder": {"kind": "linear", "matrix": [[1.0, 0.5], [0.0, 1.0]], "noise": 0.1}
    }"#;
    fs::write(&config_path, config).unwrap();
    assert_valid(
        "scm_config.schema.json",
        &serde_json::from_str(config).unwrap(),
    );

    let out = Command::new(env!("CARGO_BIN_EXE_irs"))
        .args([
            "synth",
            "--config",
            config_path.to_str().unwrap(),
            "--n",
            "800",
            "--seed",
            "5",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_valid("manifest.schema.json", &manifest);

    let codes = dir.path().join("codes.csv");
    let factors = dir.path().join("factors.csv");
    let common = [
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
    ];

    let dump = dir.path().join("partition.json");
    let mut score_args = vec!["score"];
    score_args.extend_from_slice(&common);
    score_args.extend_from_slice(&[
        "--L",
        "0",
        "--I",
        "0",
        "--J",
        "1",
        "--dump-partition",
        dump.to_str().unwrap(),
    ]);
    assert_valid("score_report.schema.json", &run_json(&score_args));
    let skeleton: Value =
        serde_json::from_str(&fs::read_to_string(&dump).unwrap()).unwrap();
    assert_valid("partition_dump.schema.json", &skeleton);

    let mut shift_args = vec!["score"];
    shift_args.extend_from_slice(&common);
    shift_args.extend_from_slice(&["--L", "0,1", "--shift", "1"]);
    assert_valid("score_report.schema.json", &run_json(&shift_args));

    let mut matrix_args = vec!["matrix"];
    matrix_args.extend_from_slice(&common);
    assert_valid("irs_report.schema.json", &run_json(&matrix_args));

    let mut mi_args = vec!["matrix"];
    mi_args.extend_from_slice(&common);
    mi_args.extend_from_slice(&["--metric", "mi"]);
    assert_valid("mi_report.schema.json", &run_json(&mi_args));

    let mut viz_args = vec!["viz"];
    viz_args.extend_from_slice(&common);
    viz_args.extend_from_slice(&["--features", "0,1"]);
    assert_valid("viz_curves.schema.json", &run_json(&viz_args));

    let plan = r#"{"factors": [{"name": "g_0", "strategy": "discrete"}]}"#;
    assert_valid(
        "discretization_plan.schema.json",
        &serde_json::from_str(plan).unwrap(),
    );
}
