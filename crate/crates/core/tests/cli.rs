use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples/data")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relucert"))
        .args(args)
        .env("RELUCERT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Report with the timing field removed.
fn stable(out: &Output) -> Value {
    let mut v = json(out);
    v.as_object_mut().unwrap().remove("elapsed_seconds");
    v
}

#[test]
fn crown_verify_reports_bounds() {
    let model = data("running_example.json");
    let out = run(&["verify", &model, &data("square_y1_ge_y2.json"), "--method", "crown"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "Verified");
    assert_eq!(v["bounds"][0]["lower"], 0.0);
    assert_eq!(v["bounds"][0]["upper"], 7.0);
    assert_eq!(v["bounds"][1]["upper"], 0.0);
    assert!((v["bounds"][1]["lower"].as_f64().unwrap() + 52.0 / 3.0).abs() < 1e-9);
    assert_eq!(v["spec_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn interval_and_zonotope_methods() {
    let model = data("running_example.json");
    let spec = data("square_y1_ge_y2.json");
    let out = run(&["verify", &model, &spec, "--method", "interval"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["verify", &model, &spec, "--method", "zonotope"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "Unknown");
}

#[test]
fn negated_post_is_falsified_with_checked_witness() {
    let out = run(&["verify", &data("running_example.json"), &data("square_y1_le_y2.json")]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["status"], "Falsified");
    let w: Vec<f64> = serde_json::from_value(v["witness"].clone()).unwrap();
    let y = relucert::model::running_example().forward(&w).unwrap();
    assert!(y[0] - y[1] > 0.0);
    assert!(v["details"]["witness_violation"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_model_is_a_usage_error() {
    let out = run(&["verify", "no/such/model.json", &data("square_y1_ge_y2.json")]);
    assert_eq!(out.status.code(), Some(66));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn bad_flags_exit_64() {
    let out = run(&["verify", &data("running_example.json")]);
    assert_eq!(out.status.code(), Some(64));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn exact_preimage_exports_sixteen_polytopes() {
    let out = run(&["preimage", &data("running_example.json"), &data("square_y1_ge_y2.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let polys = v["details"]["polytopes"].as_array().unwrap();
    assert_eq!(polys.len(), 16);
    assert!(polys.iter().all(|p| p["pattern"].as_str().unwrap().contains('|')));
    assert!((v["coverage"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn approx_preimage_holds_at_ninety_percent() {
    let out = run(&[
        "preimage",
        &data("running_example.json"),
        &data("square_y1_ge_y2_p90.json"),
        "--mode",
        "approx",
        "--target-coverage",
        "0.9",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "Holds");
    assert!(v["coverage"].as_f64().unwrap() >= 0.9);
    assert_eq!(v["details"]["iterations"], 1);
}

#[test]
fn empty_post_has_zero_coverage() {
    let out = run(&[
        "preimage",
        &data("running_example.json"),
        &data("square_empty_post.json"),
        "--mode",
        "approx",
        "--max-iters",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["status"], "Unknown");
    assert_eq!(v["coverage"], 0.0);
}

#[test]
fn exact_preimage_cap_is_distinct() {
    let out = run(&[
        "preimage",
        &data("running_example.json"),
        &data("square_y1_ge_y2.json"),
        "--cap",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds the cap"));
}

#[test]
fn explain_whole_square_is_empty() {
    let out = run(&[
        "explain",
        &data("running_example.json"),
        "--input",
        "0,0",
        "--epsilon",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let d = &json(&out)["details"];
    assert_eq!(d["fixed"], serde_json::json!([]));
    assert_eq!(d["cost"], 0.0);
    assert_eq!(d["epsilon"], 1.0);
    assert_eq!(d["verified"], true);
}

#[test]
fn explain_affine_ig_ignores_steps() {
    let model = data("affine.json");
    let ig = |steps: &str| {
        let out = run(&[
            "explain",
            &model,
            "--input",
            "1,1",
            "--epsilon",
            "0.1",
            "--ig-steps",
            steps,
        ]);
        assert_eq!(out.status.code(), Some(0));
        json(&out)["details"]["ig"].clone()
    };
    assert_eq!(ig("1"), ig("512"));
    assert_eq!(ig("1"), serde_json::json!([1.0, 2.0]));
}

#[test]
fn explain_label_errors() {
    let model = data("running_example.json");
    let out = run(&["explain", &model, "--input", "0,0", "--epsilon", "1", "--label", "7"]);
    assert_eq!(out.status.code(), Some(64));
    // (0.9, 0.9) is classified as 0
    let out = run(&[
        "explain",
        &model,
        "--input",
        "0.9,0.9",
        "--epsilon",
        "0.1",
        "--label",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not the requested label"));
}

#[test]
fn msr_brackets_one_half() {
    let out = run(&[
        "msr",
        &data("running_example.json"),
        "--input",
        "0.5,0.5",
        "--cap",
        "1",
        "--tol",
        "1e-3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let d = &json(&out)["details"];
    let (lo, hi) = (d["lower"].as_f64().unwrap(), d["upper"].as_f64().unwrap());
    assert!((lo - 0.5).abs() <= 1e-3 + 1e-12 && (hi - 0.5).abs() <= 1e-3 + 1e-12);
    assert!(!d["probes"].as_array().unwrap().is_empty());
}

#[test]
fn msr_zero_cap_is_a_usage_error() {
    let out = run(&["msr", &data("running_example.json"), "--input", "0.5,0.5", "--cap", "0"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn export_milp_declares_three_binaries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("query.lp");
    let out = run(&[
        "export-milp",
        &data("running_example.json"),
        &data("square_y1_ge_y2.json"),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(path).unwrap();
    let binaries: Vec<&str> = text
        .split("Binary\n")
        .nth(1)
        .unwrap()
        .lines()
        .map(str::trim)
        .take_while(|l| *l != "End")
        .collect();
    assert_eq!(binaries, ["d1", "d2", "d4"]);
    assert!(text.contains("relu3: z3 - zh3 = 0"));
}

#[test]
fn reports_are_reproducible() {
    let model = data("running_example.json");
    let cases: [&[&str]; 3] = [
        &["verify", &model, &data("square_y1_le_y2.json")],
        &[
            "preimage",
            &model,
            &data("square_y1_ge_y2_p90.json"),
            "--mode",
            "approx",
        ],
        &["explain", &model, "--input", "0.9,0.9", "--epsilon", "0.9", "--strict"],
    ];
    for args in cases {
        let a = run(args);
        let b = run(args);
        assert_eq!(stable(&a), stable(&b), "{args:?}");
    }
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = run(&[
        "verify",
        &data("running_example.json"),
        &data("robust_center.json"),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["command"], "verify");
    assert_eq!(v["settings"]["method"], "complete");
}
