use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn regproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regproj")).args(args).output().expect("spawn regproj")
}

fn run_in(dir: &Path, name: &str, extra: &[&str]) -> Output {
    let path = scenario(name);
    let mut args = vec!["run", path.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    regproj(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn circle_regularity_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "circle-regularity.json", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("circle-regularity.json"));
    assert_eq!(r["pass"], true);
    let checks = r["result"]["checks"].as_array().unwrap();
    assert_eq!(checks[0]["label"], "regular");
    assert_eq!(checks[0]["verdict"]["branches"], 2);
    let c = checks[0]["verdict"]["c_min"].as_f64().unwrap();
    // sheets t = ±1/√(1+v'²) give |f'|/|f| = |v'|/(1+v'²), maximal at v' = ±0.3
    let oracle = 0.3 / 1.09;
    assert!((c - oracle).abs() < 1e-3, "{c}");
    assert_eq!(checks[1]["label"], "branch-vanishes");
    assert_eq!(checks[3]["label"], "empty-intersection");
    assert!(dir.path().join("circle-regularity.svg").exists());
}

#[test]
fn counterexample_csv_is_the_log_law() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "counterexample-blowup.json", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("counterexample-blowup.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,t_s,ratio"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 36);
    for r in &rows {
        let want = r[0].ln().abs();
        assert!((r[2] - want).abs() / want < 1e-10, "{r:?}");
    }
    let r = json(&dir.path().join("counterexample-blowup.json"));
    let alpha = r["result"]["profile"]["alpha"].as_f64().unwrap();
    let beta = r["result"]["profile"]["beta"].as_f64().unwrap();
    assert!((alpha - 1.0).abs() < 1e-6 && (beta - 1.0).abs() < 1e-6, "{alpha} {beta}");
    assert_eq!(r["result"]["unbounded"]["outcome"], "witness");
}

#[test]
fn square_bad_cover_fails_at_the_parabola_tip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "square-bad-cover.json", &[]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&dir.path().join("square-bad-cover.json"));
    assert_eq!(r["pass"], false);
    let w = &r["result"]["verification"]["witness"];
    let p: Vec<f64> = w["point"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((p[0] - 0.01).abs() < 1e-12 && p[1].abs() < 1e-12, "{p:?}");
    assert!(w["ratio"].as_f64().unwrap() >= 95.0);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for name in ["counterexample-tilted.json", "square-regular-cover.json"] {
        assert!(run_in(a.path(), name, &["--grid", "40"]).status.success());
        assert!(run_in(b.path(), name, &["--grid", "40"]).status.success());
    }
    for f in ["counterexample-tilted.json", "counterexample-tilted.csv", "square-regular-cover.json", "square-regular-cover.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "square-regular-cover.json", &["--grid", "20", "--seed", "7"]);
    assert!(out.status.success());
    let r = json(&dir.path().join("square-regular-cover.json"));
    assert_eq!(r["seed"], 7);
    assert_eq!(r["scenario"]["grid"], 20);
    assert_eq!(r["result"]["verification"]["grid"], 20);
}

#[test]
fn unknown_fields_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(scenario("counterexample-blowup.json")).unwrap().replace("\"sign\"", "\"sigma\": 1, \"sign\"");
    std::fs::write(&bad, text).unwrap();
    let out = regproj(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));

    let nested = dir.path().join("nested.json");
    let text = std::fs::read_to_string(scenario("circle-regularity.json")).unwrap().replace("\"dim\": 2", "\"dim\": 2, \"colour\": 1");
    std::fs::write(&nested, text).unwrap();
    let out = regproj(&["run", nested.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_shipped_scenario_validates() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path().to_string_lossy().into_owned())
        .filter(|p| p.ends_with(".json"))
        .collect();
    files.sort();
    assert!(files.len() >= 3);
    let mut args = vec!["validate"];
    args.extend(files.iter().map(String::as_str));
    let out = regproj(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn render_reproduces_the_run_svg() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), "square-bad-cover.json", &[]).status.code(), Some(1));
    let svg = std::fs::read_to_string(dir.path().join("square-bad-cover.svg")).unwrap();
    assert!(svg.starts_with(r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800""#));
    // U and the two pieces
    assert_eq!(svg.matches("<polygon").count(), 3);

    let again = dir.path().join("again");
    let report = dir.path().join("square-bad-cover.json");
    let out = regproj(&["render", report.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(again.join("square-bad-cover.svg")).unwrap(), svg);
}

#[test]
fn profile_renders_with_reference_line() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), "counterexample-blowup.json", &[]).status.success());
    let svg = std::fs::read_to_string(dir.path().join("counterexample-blowup.svg")).unwrap();
    assert!(svg.contains("y = |ln s|"));
    assert!(svg.contains("stroke-dasharray"));
}

#[test]
fn rectifiability_has_nothing_to_render() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), "rectify-power-zero.json", &[]).status.success());
    let report = dir.path().join("rectify-power-zero.json");
    let out = regproj(&["render", report.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
