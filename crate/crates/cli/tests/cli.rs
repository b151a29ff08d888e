use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_demon-engine"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn validator() -> jsonschema::Validator {
    let text = std::fs::read_to_string(repo_root().join("docs/report.schema.json")).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_valid(v: &jsonschema::Validator, report: &str, what: &str) {
    let instance: Value = serde_json::from_str(report).unwrap_or_else(|e| panic!("{what}: {e}"));
    let errors: Vec<String> = v
        .iter_errors(&instance)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{what}: {errors:#?}");
}

#[test]
fn list_builtins_prints_every_name() {
    let o = run(&["list-builtins"]);
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(names, ["szilard", "carnot2", "eur-bell", "do-nothing"]);
}

#[test]
fn builtin_reports_match_schema() {
    let v = validator();
    for name in ["szilard", "carnot2", "eur-bell", "do-nothing"] {
        let o = run(&["builtin", name, "--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert_valid(&v, &stdout(&o), name);
    }
}

#[test]
fn scenario_files_run_and_match_schema() {
    let v = validator();
    let dir = repo_root().join("scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let o = run(&["run", path.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
            assert_valid(&v, &stdout(&o), &path.display().to_string());
            seen += 1;
        }
    }
    assert!(seen >= 4);
}

#[test]
fn schema_rejects_tampered_report() {
    let v = validator();
    let o = run(&["builtin", "szilard"]);
    let mut report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    report["engine"]["unexpected"] = Value::from(1);
    assert!(!v.is_valid(&report));
}

#[test]
fn conditional_failures_do_not_change_exit_status() {
    // Szilard's CNOT coupling breaks the branch identity but no theorem.
    let o = run(&["builtin", "szilard"]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let bi = checks.iter().find(|c| c["name"] == "branch_identification").unwrap();
    assert_eq!(bi["passed"], Value::Bool(false));
    assert_eq!(report["theorems_hold"], Value::Bool(true));
}

#[test]
fn malformed_matrix_exits_1_without_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(repo_root().join("scenarios/szilard.json"))
        .unwrap()
        .replacen(
            "[[[0, 0], [0, 0]], [[0, 0], [0, 0]]]",
            "[[[0, 0], [0, 0]], [[0, 0]]]",
            1,
        );
    let input = dir.path().join("bad.json");
    std::fs::write(&input, text).unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["run", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let err = stderr(&o);
    assert!(err.contains("system.h_initial"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn missing_file_and_unknown_builtin_exit_1() {
    assert_eq!(run(&["run", "/nonexistent/scenario.json"]).status.code(), Some(1));
    assert_eq!(run(&["builtin", "maxwell"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--count", "0"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--count", "2", "--dims", "2,2"]).status.code(), Some(1));
}

#[test]
fn out_flag_writes_file_and_csv_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["builtin", "eur-bell", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
}

#[test]
fn sweep_of_one_gives_header_and_one_row() {
    let o = run(&["sweep", "--count", "1", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert!(stderr(&o).contains("0 theorem violations"));
}

#[test]
fn sweep_is_byte_identical_for_a_seed() {
    let a = run(&["sweep", "--count", "12", "--seed", "5", "--jobs", "2"]);
    let b = run(&["sweep", "--count", "12", "--seed", "5", "--jobs", "1"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["sweep", "--count", "12", "--seed", "6"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn sweep_accepts_other_dimensions() {
    let o = run(&["sweep", "--count", "3", "--seed", "1", "--dims", "3,2,2,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
}
