use std::f64::consts::PI;
use std::process::Command;

use serde_json::Value;

use krein::cli::run;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("krein").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = invoke(args);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out} {err}"));
    (code, v)
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn forward_two_masses_with_split() {
    let f2 = fixture("f2.json");
    let (code, v) = json(&["forward", "--string", &f2, "--split", "0.5"]);
    assert_eq!(code, 0);
    let r = &v["result"];
    let sigma = floats(&r["sigma"]);
    assert!((sigma[0] - 3.0).abs() < 1e-12 && (sigma[1] - 9.0).abs() < 1e-12);
    for g in floats(&r["gamma_sq"]) {
        assert!((g - 2.0 / 9.0).abs() < 1e-12);
    }
    assert!((floats(&r["sigma_a"])[0] - 9.0).abs() < 1e-12);
    assert!((floats(&r["sigma_b"])[0] - 9.0).abs() < 1e-12);
}

#[test]
fn bad_triple_is_rejected_for_interlacing() {
    let (code, v) = json(&["validate-triple", "--triple", &fixture("bad_triple.json")]);
    assert_eq!(code, 2);
    assert_eq!(v["result"]["member"], false);
    assert_eq!(v["result"]["violations"][0]["kind"], "interlacing");
}

#[test]
fn empty_string_round_trip() {
    let (code, v) = json(&["roundtrip", "--string", &fixture("empty.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["residual"], 0.0);
}

#[test]
fn seeded_round_trips_pass() {
    for seed in 0..100 {
        let (code, _, err) = invoke(&["roundtrip", "--seed", &seed.to_string()]);
        assert_eq!(code, 0, "seed {seed}: {err}");
    }
}

#[test]
fn residual_breach_exits_3() {
    let (code, v) = json(&["roundtrip", "--seed", "1", "--precision-bits", "32", "--tol", "1e-12"]);
    assert_eq!(code, 3);
    assert!(v["result"]["residual"].as_f64().unwrap() > 1e-12);
    let (code, _) = json(&["roundtrip", "--seed", "1", "--precision-bits", "32", "--tol", "1e-6"]);
    assert_eq!(code, 0);
}

#[test]
fn malformed_json_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.json");
    std::fs::write(&p, r#"{"interval":[0,1],"positions":[0.5],"masses":[{"m":1}]}"#).unwrap();
    let (code, _, err) = invoke(&["forward", "--string", p.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("masses[0]"), "{err}");
    let (code, _, _) = invoke(&["forward", "--string", "/nonexistent/file.json"]);
    assert_eq!(code, 2);
    let (code, _, _) = invoke(&["forward"]);
    assert_eq!(code, 2);
    let (code, _, _) = invoke(&["forward", "--string", &fixture("f2.json"), "--output", "xml"]);
    assert_eq!(code, 2);
}

#[test]
fn inverse_commands() {
    let (code, v) = json(&["inverse-measure", "--measure", &fixture("f2_measure.json")]);
    assert_eq!(code, 0);
    let xs = floats(&v["result"]["string"]["positions"]);
    assert!((xs[0] - 1.0 / 3.0).abs() < 1e-12 && (xs[1] - 2.0 / 3.0).abs() < 1e-12);
    let (code, v) = json(&["inverse-three", "--triple", &fixture("f2_triple.json")]);
    assert_eq!(code, 0);
    let ms = floats(&v["result"]["string"]["masses"]);
    assert!((ms[0] - 1.0).abs() < 1e-12 && (ms[1] - 1.0).abs() < 1e-12);
    let (code, _, _) = invoke(&["inverse-three", "--triple", &fixture("bad_triple.json")]);
    assert_eq!(code, 2);
}

#[test]
fn spectrum_of_uniform_density() {
    let (code, v) = json(&["spectrum", "--string", &fixture("uniform_density.json"), "--max-lambda", "50"]);
    assert_eq!(code, 0);
    let e = floats(&v["result"]["eigenvalues"]);
    assert_eq!(e.len(), 2);
    assert!((e[0] - PI * PI).abs() < 1e-8 && (e[1] - 4.0 * PI * PI).abs() < 1e-8);
}

#[test]
fn ladder_csv() {
    let (code, out, err) =
        invoke(&["ladder", "--measure", &fixture("uniform_measure.json"), "--cutoffs", "15,45", "--output", "csv"]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "cutoff,atoms,eigen_residual,weight_residual,weighted_total,weakstar");
    assert_eq!(lines.len(), 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let f2 = fixture("f2.json");
    let cases: [&[&str]; 3] = [
        &["forward", "--string", &f2, "--split", "0.5", "--output", "csv"],
        &["inverse-three", "--triple", &fixture("f2_triple.json")],
        &["roundtrip", "--seed", "7"],
    ];
    for args in cases {
        assert_eq!(invoke(args).1, invoke(args).1, "{args:?}");
    }
}

#[test]
fn out_file_written() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("fwd.csv");
    let (code, out, _) = invoke(&["forward", "--string", &fixture("f1.json"), "--output", "csv", "--out", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&p).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("index,lambda,gamma_sq,coupling,theta"));
    let row: Vec<f64> = rows.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[1] - 4.0).abs() < 1e-12 && (row[2] - 0.25).abs() < 1e-12, "{text}");
}

#[test]
fn binary_exit_codes_and_env_precision() {
    let bin = env!("CARGO_BIN_EXE_krein");
    let out = Command::new(bin)
        .args(["forward", "--string", &fixture("f2.json")])
        .env("KREIN_PRECISION_BITS", "128")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["precision_bits"], 128);
    assert!(v["result"]["sigma"][0].as_str().unwrap().starts_with("3"));
    let out = Command::new(bin).args(["validate-triple", "--triple", &fixture("bad_triple.json")]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
