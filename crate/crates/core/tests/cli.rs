//! End-to-end runs of the `lorentz-lab` binary and the runner.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lorentz_lab::runner::{self, parse_config, CheckId};
use lorentz_lab::scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lorentz-lab"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn shipped_configs_parse() {
    for name in ["minkowski4.json", "example7.json", "de_sitter4.json", "weighted_warped.json"] {
        let text = std::fs::read_to_string(repo_config(name)).unwrap();
        parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn example7_config_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&repo_config("example7.json"), tmp.path(), &[]);
    let report = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{report}");
    assert!(report.contains("example7_certification [published-example] PASS"), "{report}");
    assert!(report.contains("K* = 1.5"), "{report}");
    let written = std::fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert_eq!(written, report);
}

#[test]
fn de_sitter_timelike_convergence_fails_with_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&repo_config("de_sitter4.json"), tmp.path(), &[]);
    let report = stdout(&out);
    assert_eq!(out.status.code(), Some(1), "{report}");
    assert!(report.contains("timelike_convergence [numerical-oracle] FAIL"), "{report}");
    assert!(report.contains("summary: 0 passed, 1 failed, 0 errors"), "{report}");
}

#[test]
fn every_report_line_carries_a_basis_label() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&repo_config("example7.json"), tmp.path(), &[]);
    for line in stdout(&out).lines() {
        if let Some(id) = line.split_whitespace().next().and_then(CheckId::parse) {
            assert!(
                ["[closed-form]", "[numerical-oracle]", "[published-example]"]
                    .iter()
                    .any(|b| line.starts_with(&format!("{id} {b} "))),
                "{line}"
            );
        }
    }
}

#[test]
fn csv_series_have_the_fixed_header_and_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.json");
    std::fs::write(&config, r#"{"scenario":"minkowski4","checks":["raychaudhuri_residual"],"seed":3}"#).unwrap();
    let mut snapshots = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let out = run_config(&config, &dir, &[]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        let mut csvs: Vec<(String, String)> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
            .collect();
        csvs.sort();
        assert!(!csvs.is_empty());
        for (name, text) in &csvs {
            assert_eq!(text.lines().next(), Some(runner::CSV_HEADER), "{name}");
            for row in text.lines().skip(1) {
                assert_eq!(row.split(',').count(), 8, "{name}: {row}");
            }
        }
        snapshots.push(csvs);
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"scenario":"de_sitter4","checks":["nosuch"]}"#).unwrap();
    let out = run_config(&bad, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuch"));

    let out = run_config(&tmp.path().join("missing.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));

    let out = run_config(&repo_config("example7.json"), tmp.path(), &["--tol", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_scenario_exits_2_with_failed_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(r#"{"scenario":"no_such_space","checks":["manifest"]}"#).unwrap();
    cfg.output_dir = tmp.path().to_path_buf();
    let summary = runner::run(&cfg);
    assert_eq!(summary.exit_code, 2);
    assert!(summary.report.contains("FAILED"), "{}", summary.report);
    let written = std::fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(written.contains("FAILED"));
}

#[test]
fn scenario_file_is_resolved_next_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("cfg");
    std::fs::create_dir(&dir).unwrap();
    let spec = scenario::builtin("de_sitter4").unwrap().spec;
    std::fs::write(dir.join("space.json"), serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    std::fs::write(dir.join("run.json"), r#"{"scenario_file":"space.json","checks":["manifest"]}"#).unwrap();
    let out = bin()
        .current_dir(tmp.path())
        .arg("run")
        .arg("cfg/run.json")
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    let report = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{report}{}", String::from_utf8_lossy(&out.stderr));
    assert!(report.contains("manifest [closed-form] PASS"), "{report}");
}

#[test]
fn seed_override_is_echoed_in_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&repo_config("example7.json"), tmp.path(), &["--seed", "99", "--tol", "1e-10"]);
    let report = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{report}");
    assert!(report.contains(r#""seed":99"#), "{report}");
    assert!(report.contains(r#""rtol":1e-10"#), "{report}");
}

#[test]
fn listing_verbs_cover_everything() {
    let out = bin().arg("list-checks").output().unwrap();
    let text = stdout(&out);
    for id in CheckId::ALL {
        assert!(text.lines().any(|l| l.starts_with(id.as_str())), "{id}");
    }
    let out = bin().arg("list-scenarios").output().unwrap();
    let text = stdout(&out);
    for (name, _) in scenario::builtin_catalog() {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name}");
        scenario::builtin(&name.replace("<n>", "3")).unwrap();
    }
}

#[test]
fn shipped_scenario_file_config_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&repo_config("weighted_warped.json"), tmp.path(), &[]);
    let report = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{report}{}", String::from_utf8_lossy(&out.stderr));
    assert!(report.contains("scenario: weighted_warped"), "{report}");
}
