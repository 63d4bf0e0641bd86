//! End-to-end tests of the binary interface: flags, file formats, JSON
//! shapes and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irs"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn crossed_config() -> &'static str {
    r#"{
        "confounders": [],
        "factors": [
            {"cardinality": 3, "table": [[0.3333333333333333, 0.3333333333333333, 0.3333333333333334]]},
            {"cardinality": 4, "table": [[0.25, 0.25, 0.25, 0.25]]},
            {"cardinality": 5, "table": [[0.2, 0.2, 0.2, 0.2, 0.2]]}
        ],
        "encoder": {
            "kind": "permutation",
            "assignment": [2, 0, 1],
            "scales": [1.5, 0.7, 2.0],
            "offsets": [-1.0, 0.3, 4.0],
            "noise": 0.0
        }
    }"#
}

fn synth_crossed(dir: &Path) -> (PathBuf, PathBuf) {
    let config = dir.join("scm.json");
    fs::write(&config, crossed_config()).unwrap();
    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--crossed",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (dir.join("codes.csv"), dir.join("factors.csv"))
}

#[test]
fn score_emits_one_irs_value() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let out = run(&[
        "score",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--L",
        "0",
        "--I",
        "2",
        "--J",
        "0,1",
    ]);
    let json = stdout_json(&out);
    // z_0 tracks g_2 exactly on crossed noise-free data
    assert!((json["score"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(json["metric"], "irs");
    assert_eq!(json["L"], serde_json::json!([0]));
    assert_eq!(json["config"]["distance"], "l2");
}

#[test]
fn score_accepts_column_names_in_index_sets() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let out = run(&[
        "score",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--L",
        "z_0",
        "--I",
        "g_2",
        "--J",
        "g_0,g_1",
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["I"], serde_json::json!([2]));
    assert_eq!(json["J"], serde_json::json!([0, 1]));
}

#[test]
fn empty_nuisance_set_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let out = run(&[
        "score",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--L",
        "0",
        "--I",
        "1",
        "--J",
        "",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--J"));
}

#[test]
fn missing_input_file_is_an_io_error() {
    let out = run(&[
        "score",
        "--codes",
        "/nonexistent/z.csv",
        "--factors",
        "/nonexistent/g.csv",
        "--L",
        "0",
        "--J",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn matrix_is_one_hot_for_an_axis_aligned_encoder() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let out = run(&[
        "matrix",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--fast-path",
        "auto",
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["config"]["fast_path_used"], true);
    let assignment = [2usize, 0, 1];
    for (l, &target) in assignment.iter().enumerate() {
        let row = json["matrix"][l].as_array().unwrap();
        for (i, v) in row.iter().enumerate() {
            let v = v.as_f64().unwrap();
            if i == target {
                assert!((v - 1.0).abs() < 1e-9);
            } else {
                assert!(v < 1.0 - 1e-9);
            }
        }
        assert_eq!(json["per_feature"][l]["i_star"], target);
    }
    assert!((json["overall"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn matrix_mi_baseline_has_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let out = run(&[
        "matrix",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--metric",
        "mi",
        "--buckets",
        "20",
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["config"]["metric"], "mi");
    assert_eq!(json["config"]["buckets"], 20);
    assert_eq!(json["matrix"].as_array().unwrap().len(), 3);
    // z_0 = monotone(g_2): MI equals H(G_2) = ln 5
    let mi = json["matrix"][0][2].as_f64().unwrap();
    assert!((mi - 5.0f64.ln()).abs() < 1e-9);
}

#[test]
fn fast_path_on_with_non_crossed_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let codes = dir.path().join("z.csv");
    let factors = dir.path().join("g.csv");
    // 5 rows: tuple (0,0) duplicated, not a full crossing
    fs::write(&codes, "z_0\n0.0\n0.5\n1.0\n1.5\n0.1\n").unwrap();
    fs::write(&factors, "g_0,g_1\n0,0\n0,1\n1,0\n1,1\n0,0\n").unwrap();
    let out = run(&[
        "matrix",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--fast-path",
        "on",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn viz_emits_flat_curves_for_axis_aligned_features() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let out = run(&[
        "viz",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--features",
        "0",
    ]);
    let json = stdout_json(&out);
    let report = &json[0];
    assert_eq!(report["status"], "ok");
    assert_eq!(report["i_star"], 2);
    for panel in report["panels"].as_array().unwrap() {
        assert!(panel["flatness"].as_f64().unwrap() < 1e-9);
        // one curve per realization of the dominant factor (cardinality 5)
        assert_eq!(panel["curves"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn viz_rejects_out_of_range_feature() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let out = run(&[
        "viz",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--features",
        "99",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_is_deterministic_and_crossed_mode_round_trips() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let (codes_a, factors_a) = synth_crossed(dir_a.path());
    let (codes_b, factors_b) = synth_crossed(dir_b.path());
    assert_eq!(fs::read(&codes_a).unwrap(), fs::read(&codes_b).unwrap());
    assert_eq!(fs::read(&factors_a).unwrap(), fs::read(&factors_b).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir_a.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["crossed"], true);
    assert_eq!(manifest["n"], 60);
    assert!(manifest["config_sha256"].as_str().unwrap().len() == 64);
    assert!(dir_a.path().join("scm_config.json").is_file());
}

#[test]
fn synth_npy_format_round_trips_through_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scm.json");
    fs::write(&config, crossed_config()).unwrap();
    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--crossed",
        "--format",
        "npy",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "score",
        "--codes",
        dir.path().join("codes.npy").to_str().unwrap(),
        "--factors",
        dir.path().join("factors.npy").to_str().unwrap(),
        "--L",
        "0",
        "--I",
        "2",
        "--J",
        "0,1",
    ]);
    let json = stdout_json(&out);
    assert!((json["score"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn invalid_scm_config_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(
        &config,
        r#"{"factors": [{"cardinality": 2, "table": [[0.7, 0.7]]}],
            "encoder": {"kind": "constant", "values": [1.0], "noise": 0.0}}"#,
    )
    .unwrap();
    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("factor 0"), "stderr: {stderr}");
}

#[test]
fn inactive_only_score_exits_3_but_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let codes = dir.path().join("z.csv");
    let factors = dir.path().join("g.csv");
    fs::write(&codes, "z_0\n7.0\n7.0\n7.0\n7.0\n").unwrap();
    fs::write(&factors, "g_0,g_1\n0,0\n0,1\n1,0\n1,1\n").unwrap();
    let out = run(&[
        "score",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--L",
        "0",
        "--I",
        "0",
        "--J",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["active"], false);
    assert!(json["score"].is_null());
}

#[test]
fn workers_flag_and_env_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let args = [
        "matrix",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
    ];
    let base = stdout_json(&run(&args));
    let single = stdout_json(&bin().args(args).args(["--workers", "1"]).output().unwrap());
    let via_env = stdout_json(
        &bin()
            .args(args)
            .env("IRS_ENGINE_WORKERS", "2")
            .output()
            .unwrap(),
    );
    assert_eq!(base["matrix"], single["matrix"]);
    assert_eq!(base["matrix"], via_env["matrix"]);
}

#[test]
fn dump_partition_writes_the_skeleton() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let dump = dir.path().join("partition.json");
    let out = run(&[
        "score",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--L",
        "0",
        "--I",
        "0",
        "--J",
        "1,2",
        "--dump-partition",
        dump.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let skeleton: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&dump).unwrap()).unwrap();
    // crossed 3x4x5: 3 outer cells of 20 rows, 20 inner cells each
    let outer = skeleton["outer"].as_array().unwrap();
    assert_eq!(outer.len(), 3);
    for cell in outer {
        assert_eq!(cell["size"], 20);
        assert_eq!(cell["inner"].as_array().unwrap().len(), 20);
    }
}

#[test]
fn domain_shift_flag_scores_against_shifted_factors() {
    let dir = tempfile::tempdir().unwrap();
    let (codes, factors) = synth_crossed(dir.path());
    let out = run(&[
        "score",
        "--codes",
        codes.to_str().unwrap(),
        "--factors",
        factors.to_str().unwrap(),
        "--L",
        "0",
        "--shift",
        "0",
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["metric"], "domain_shift");
    // z_0 tracks g_2; shifting g_0 does not move it
    assert!((json["score"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(json["I"], serde_json::json!([1, 2]));
    assert_eq!(json["J"], serde_json::json!([0]));
}
