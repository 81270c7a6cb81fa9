use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gptw_cli::{render_markdown, ReportDocument, TheoryDocument};
use gptw_core::postulates::{Status, Witness};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gptw"));
    c.env_remove("GPTW_SEED");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&v).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, v: &Value) {
    let errors: Vec<String> = validator.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn builtin_doc(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    let out = bin().args(["builtin", name, "--out"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn run(args: &[&str], path: &Path, report: &Path) -> (Output, ReportDocument, Value) {
    let out = bin().args(args).arg(path).arg("--out").arg(report).output().unwrap();
    let text = std::fs::read_to_string(report).unwrap_or_else(|_| panic!("{}", String::from_utf8_lossy(&out.stderr)));
    let value: Value = serde_json::from_str(&text).unwrap();
    (out, serde_json::from_str(&text).unwrap(), value)
}

fn strip_durations(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("duration");
            map.values_mut().for_each(strip_durations);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_durations),
        _ => {}
    }
}

#[test]
fn builtin_documents_have_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let validator = schema("theory.schema.json");
    let qubit: Value = serde_json::from_str(&std::fs::read_to_string(builtin_doc(dir.path(), "qubit")).unwrap()).unwrap();
    assert_eq!(qubit["k"], 4);
    assert_eq!(qubit["group"]["kind"], "named");
    let square: Value =
        serde_json::from_str(&std::fs::read_to_string(builtin_doc(dir.path(), "square_gbit")).unwrap()).unwrap();
    assert_eq!(square["geometry"]["kind"], "polytope");
    assert_eq!(square["geometry"]["vertices"].as_array().unwrap().len(), 4);
    let q2: Value = serde_json::from_str(&std::fs::read_to_string(builtin_doc(dir.path(), "quantum2")).unwrap()).unwrap();
    assert_eq!(q2["k"], 16);
    assert_eq!(q2["group"]["generators"].as_array().unwrap().len(), 15);
    for v in [&qubit, &square, &q2] {
        assert_valid(&validator, v);
    }
    for name in ["classical(3)", "ball(4)", "quantum(3)"] {
        let v: Value = serde_json::from_str(&std::fs::read_to_string(builtin_doc(dir.path(), name)).unwrap()).unwrap();
        assert_valid(&validator, &v);
    }
}

#[test]
fn unknown_builtin_is_an_input_error() {
    let out = bin().args(["builtin", "octahedron"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin().args(["builtin", "ball(1)"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn qubit_document_passes() {
    let dir = tempfile::tempdir().unwrap();
    let doc = builtin_doc(dir.path(), "qubit");
    let (out, report, value) = run(&["check"], &doc, &dir.path().join("r.json"));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report.status, Status::Pass);
    let ids: Vec<&str> = report.checks.iter().map(|c| c.report.id.as_str()).collect();
    assert_eq!(ids, ["cr", "tl", "nse", "all-effects", "interact"]);
    assert_valid(&schema("report.schema.json"), &value);
}

#[test]
fn square_document_fails_with_replayable_witness() {
    let dir = tempfile::tempdir().unwrap();
    let doc = builtin_doc(dir.path(), "square_gbit");
    let md = dir.path().join("r.md");
    let out = bin()
        .args(["check"])
        .arg(&doc)
        .args(["--postulates", "cr,nse", "--out"])
        .arg(dir.path().join("r.json"))
        .arg("--markdown")
        .arg(&md)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    let report: ReportDocument = serde_json::from_str(&text).unwrap();
    assert_valid(&schema("report.schema.json"), &serde_json::from_str(&text).unwrap());
    let nse = report.checks.iter().find(|c| c.report.id == "nse").unwrap();
    let w = nse.report.witness.as_ref().unwrap();
    assert!(matches!(w, Witness::SimultaneousEncoding { .. }));
    let theory = TheoryDocument::load(&doc).unwrap().to_theory().unwrap();
    assert!(w.replay(&theory, 2.0 * nse.report.tolerance).unwrap().reproduced);
    // The markdown is a function of the JSON alone.
    assert_eq!(render_markdown(&report), std::fs::read_to_string(&md).unwrap());
}

#[test]
fn malformed_and_ragged_documents_exit_3_with_position() {
    let out = bin().arg("check").arg(fixture("malformed.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("malformed.json:6:1:"), "{err}");

    let out = bin().arg("check").arg(fixture("ragged_vertices.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ragged_vertices.json:7:"), "{err}");
    assert!(err.contains("not rectangular"), "{err}");

    let out = bin().args(["check", "/nonexistent/theory.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin().args(["check", "--postulates", "gravity"]).arg(fixture("listed_bit.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn semantic_errors_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"name": "x", "k": 3, "geometry": {"kind": "ball", "d": 2}, "unit_effect": [1, 0, 1], "group": {"kind": "named", "name": "so(2)"}}"#,
    )
    .unwrap();
    let out = bin().arg("check").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unit_effect"));
}

#[test]
fn listed_effects_document() {
    let dir = tempfile::tempdir().unwrap();
    let (out, report, _) = run(&["check"], &fixture("listed_bit.json"), &dir.path().join("r.json"));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report.budgets.seed, 5);
    let status = |id: &str| report.checks.iter().find(|c| c.report.id == id).unwrap().report.status;
    assert_eq!(status("cr"), Status::Fail);
    assert_eq!(status("all-effects"), Status::Pass);
}

#[test]
fn reconstruct_distorted_ball_recovers_frame() {
    let dir = tempfile::tempdir().unwrap();
    let (out, report, value) = run(&["reconstruct"], &fixture("distorted_ball.json"), &dir.path().join("r.json"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_valid(&schema("report.schema.json"), &value);
    let r = report.reconstruction.unwrap();
    assert_eq!(r.equivalent_to.as_deref(), Some("qubit"));
    // The injected distortion has condition number 10; L undoes it.
    assert!((r.frame_condition.unwrap() - 10.0).abs() < 1e-6);
    let ids: Vec<&str> = report.checks.iter().map(|c| c.report.id.as_str()).collect();
    assert_eq!(ids, gptw_core::postulates::pipeline::STAGES);
}

#[test]
fn reconstruct_rejects_ball2_and_classical_bit() {
    let dir = tempfile::tempdir().unwrap();
    for (name, stage) in [("ball(2)", "dimension_gate"), ("classical(2)", "continuity")] {
        let doc = builtin_doc(dir.path(), name);
        let (out, report, _) = run(&["reconstruct"], &doc, &dir.path().join("r.json"));
        assert_eq!(out.status.code(), Some(1), "{name}");
        let last = report.checks.last().unwrap();
        assert_eq!(last.report.id, stage);
        assert_eq!(last.report.status, Status::Fail);
        assert!(report.reconstruction.unwrap().frame_map.is_none());
    }
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let doc = builtin_doc(dir.path(), "ball(3)");
    let (_, _, mut a) = run(&["check", "--samples", "500"], &doc, &dir.path().join("a.json"));
    let (_, _, mut b) = run(&["check", "--samples", "500"], &doc, &dir.path().join("b.json"));
    strip_durations(&mut a);
    strip_durations(&mut b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn seed_comes_from_flag_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    let doc = builtin_doc(dir.path(), "classical(2)");
    let report = dir.path().join("r.json");
    let read = || -> ReportDocument { serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap() };

    bin().args(["check", "--postulates", "tl"]).arg(&doc).arg("--out").arg(&report).env("GPTW_SEED", "42").output().unwrap();
    assert_eq!(read().budgets.seed, 42);
    bin()
        .args(["check", "--postulates", "tl", "--seed", "7"])
        .arg(&doc)
        .arg("--out")
        .arg(&report)
        .env("GPTW_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(read().budgets.seed, 7);
    bin().args(["check", "--postulates", "tl"]).arg(&doc).arg("--out").arg(&report).output().unwrap();
    let r = read();
    assert_eq!((r.budgets.seed, r.budgets.samples), (0, 10_000));
    assert_eq!(r.budgets.tolerance, None);
}

#[test]
fn tolerance_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let doc = builtin_doc(dir.path(), "classical(3)");
    let (_, report, _) = run(&["check", "--postulates", "all-effects", "--tol", "1e-6"], &doc, &dir.path().join("r.json"));
    assert_eq!(report.budgets.tolerance, Some(1e-6));
    assert_eq!(report.checks[0].report.tolerance, 1e-6);
}

#[test]
fn stdout_formats() {
    let dir = tempfile::tempdir().unwrap();
    let doc = builtin_doc(dir.path(), "classical(2)");
    let out = bin().args(["check", "--postulates", "cr"]).arg(&doc).output().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], "gptw-report/1");
    let out = bin().args(["check", "--postulates", "cr", "--format", "markdown"]).arg(&doc).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("# check report: classical(2)"));
    assert!(text.contains("| cr | fail | disconnected |"));
}
