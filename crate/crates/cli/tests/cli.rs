//! End-to-end runs of the binary against the model corpus.
//!
//! Golden documents are regenerated with `UPDATE_GOLDEN=1 cargo test -p tropcert-cli`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn tropcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tropcert")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn check_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(expected == actual, "{name} differs from its golden copy");
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn certify_exit_codes() {
    let m = model("mlv_half.json");
    let o = tropcert(&["certify", arg(&m)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["document"], "certificate");
    assert_eq!(doc["verdict"]["permanent"], true);

    for name in ["classical_lv.json", "mlv_unit_second.json"] {
        let o = tropcert(&["certify", arg(&model(name))]);
        assert_eq!(code(&o), 2, "{name}");
        assert!(stderr(&o).contains("not certified"));
    }
    let o = tropcert(&["certify", arg(&model("classical_lv.json"))]);
    assert!(stderr(&o).contains("witness"), "{}", stderr(&o));

    assert_eq!(code(&tropcert(&["certify", "no/such/model.json"])), 1);
    assert_eq!(code(&tropcert(&["certify", arg(&m), "--varrho", "abc"])), 1);
    assert_eq!(code(&tropcert(&["certify", arg(&m), "--svg"])), 1);
    assert_eq!(code(&tropcert(&["frobnicate"])), 1);
    assert_eq!(code(&tropcert(&["--help"])), 0);
}

#[test]
fn strategies_and_fans() {
    let g = model("two_cycles.json");
    assert_eq!(code(&tropcert(&["certify", arg(&g)])), 2);
    assert_eq!(code(&tropcert(&["certify", arg(&g), "--strategy", "toric"])), 0);
    assert_eq!(code(&tropcert(&["certify", arg(&model("classical_lv.json")), "--strategy", "toric"])), 1);

    let r = model("rrobsys.json");
    assert_eq!(code(&tropcert(&["certify", arg(&r), "--fan", "normal"])), 0);
    let o = tropcert(&["certify", arg(&r), "--fan", "normal"]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["verdict"]["strategy"], "dominance-normal");

    let custom = format!("custom:{}", arg(&model("axis_fan.json")));
    let o = tropcert(&["certify", arg(&model("mlv_half.json")), "--fan", &custom]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["verdict"]["strategy"], "dominance-custom");
    assert_eq!(code(&tropcert(&["certify", arg(&r), "--fan", "sideways"])), 1);
}

#[test]
fn golden_documents() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let m = model("mlv_half.json");
    let o = tropcert(&["certify", arg(&m), "--varrho", "1/404", "--eta", "1/32", "--seed", "3", "--out", out, "--svg"]);
    assert_eq!(code(&o), 0);
    let mut doc = read_json(&dir.path().join("certificate.json"));
    // Paths differ between checkouts.
    doc["config"]["input"] = Value::Null;
    doc["config"]["out"] = Value::Null;
    check_golden("mlv_half_certificate.json", &(serde_json::to_string_pretty(&doc).unwrap() + "\n"));
    check_golden("mlv_half_certificate.svg", &fs::read_to_string(dir.path().join("certificate.svg")).unwrap());

    let custom = format!("custom:{}", arg(&model("axis_fan.json")));
    let o = tropcert(&["escape", "--fan", &custom, "--varrho", "1/10"]);
    assert_eq!(code(&o), 0);
    check_golden("axis_fan_escape.json", &String::from_utf8(o.stdout).unwrap());

    let o = tropcert(&["escape", arg(&model("rrobsys.json")), "--fan", "normal"]);
    assert_eq!(code(&o), 0);
    check_golden("rrobsys_normal_escape.json", &String::from_utf8(o.stdout).unwrap());
    assert_eq!(code(&tropcert(&["escape"])), 1);
}

#[test]
fn region_family_and_plot() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = tropcert(&["region", arg(&model("mlv_half.json")), "--family", "5", "--out", out, "--svg"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("family nested: true"));

    let doc = read_json(&dir.path().join("region.json"));
    assert_eq!(doc["document"], "region");
    assert_eq!(doc["polygon"]["report"]["pass"], true);
    let family = doc["family"].as_array().unwrap();
    assert_eq!(family.len(), 5);
    assert!(family.iter().all(|f| f["verified"] == true));
    assert!(family[..4].iter().all(|f| f["nested_in_next"] == true));

    // Re-rendering the exported document reproduces the figure byte for byte.
    let svg = fs::read_to_string(dir.path().join("region.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let o = tropcert(&["plot", arg(&dir.path().join("region.json"))]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), svg);

    let o = tropcert(&["region", arg(&model("classical_lv.json"))]);
    assert_eq!(code(&o), 2);
    assert!(o.stdout.is_empty());
}

#[test]
fn simulate_tracks_the_region() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let m = model("mlv_half.json");
    assert_eq!(code(&tropcert(&["region", arg(&m), "--out", out])), 0);
    let region = dir.path().join("region.json");
    let args = ["simulate", arg(&m), "--runs", "6", "--t-end", "10", "--step", "2e-3", "--seed", "7", "--region", arg(&region)];
    let o = tropcert(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("all runs entered: true; runs leaving after entry: 0"), "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["trajectories"].as_array().unwrap().len(), 6);
    assert_eq!(doc["report"]["violations"], 0);
    assert_eq!(tropcert(&args).stdout, o.stdout, "same seed, same document");

    assert_eq!(code(&tropcert(&["simulate", arg(&m), "--runs", "0"])), 1);
    assert_eq!(code(&tropcert(&["simulate", arg(&m), "--step", "-1"])), 1);
    let cert = dir.path().join("c");
    tropcert(&["certify", arg(&m), "--out", arg(&cert)]);
    assert_eq!(code(&tropcert(&["simulate", arg(&m), "--region", arg(&cert.join("certificate.json"))])), 1);
}

#[test]
fn simulate_flags_unbounded_amplitude() {
    let o = tropcert(&[
        "simulate", arg(&model("classical_lv.json")), "--schedule", "unit", "--runs", "12", "--t-end", "20", "--step", "1e-2",
        "--stride", "10", "--seed", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("not certified; simulating without a region"));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["report"]["unbounded_amplitude"], true);
    assert_eq!(doc["report"]["region_tracked"], false);
}
