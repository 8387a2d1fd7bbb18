//! End-to-end runs of the compiled binary: output shapes, golden values,
//! exit codes, and determinism of the file exports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairalloc"))
}

const CANONICAL: &str = r#"{
  "resources": [9, 18],
  "users": [
    {"id": "A", "demand": [1, 4]},
    {"id": "B", "demand": [3, 1]}
  ]
}"#;

const TWO_PHASE: &str = r#"{
  "resources": [59, 19],
  "users": [
    {"id": "A", "demand": [1, 4]},
    {"id": "B", "demand": [3, 1]}
  ]
}"#;

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json_stdout(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON document")
}

#[test]
fn allocate_drf_and_pdrf_agree_on_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "canonical.json", CANONICAL);

    let drf = json_stdout(&bin().arg("allocate").arg(&path).output().unwrap());
    assert_eq!(drf["schema_version"], 1);
    assert_eq!(drf["algorithm"], "drf");
    assert_eq!(drf["halt_reason"], "all-saturated");
    assert_eq!(drf["allocation"]["tasks"]["A"], 3);
    assert_eq!(drf["allocation"]["tasks"]["B"], 2);

    let pdrf = json_stdout(
        &bin()
            .args(["allocate", "--algo", "pdrf"])
            .arg(&path)
            .output()
            .unwrap(),
    );
    assert_eq!(pdrf["cycle_factor"], "2");
    assert_eq!(pdrf["allocation"]["tasks"], drf["allocation"]["tasks"]);
    assert_eq!(pdrf["multipliers"]["A"], 3);
}

#[test]
fn allocate_edrf_reports_exact_amounts() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "canonical.json", CANONICAL);
    let doc = json_stdout(
        &bin()
            .args(["allocate", "--algo", "edrf"])
            .arg(&path)
            .output()
            .unwrap(),
    );
    assert_eq!(doc["allocation"]["shares"]["A"], "2/3");
    assert_eq!(doc["allocation"]["shares"]["B"], "2/3");
    assert_eq!(doc["allocation"]["amounts"]["A"][1], "12");
    assert_eq!(doc["allocation"]["rounds"][0]["x"], "2/3");
}

#[test]
fn allocate_writes_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "canonical.json", CANONICAL);
    let trace_path = dir.path().join("trace.tsv");
    let out = bin()
        .arg("allocate")
        .arg(&path)
        .arg("--trace")
        .arg(&trace_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let trace = std::fs::read_to_string(&trace_path).unwrap();
    assert_eq!(
        trace,
        "1\tB\t1/3\n2\tA\t2/9\n3\tA\t4/9\n4\tB\t2/3\n5\tA\t2/3\nhalt\tall-saturated\n"
    );
}

#[test]
fn allocate_reads_stdin_dash() {
    let mut child = bin()
        .args(["allocate", "-", "--algo", "pdrf"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(CANONICAL.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    let doc = json_stdout(&out);
    assert_eq!(doc["allocation"]["tasks"]["B"], 2);
}

#[test]
fn malformed_scenario_names_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "bad.json",
        r#"{"resources": [9], "users": [{"id": "A", "demandz": [1]}]}"#,
    );
    let out = bin().arg("allocate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("demandz"), "diagnostic was: {stderr}");
}

#[test]
fn structurally_invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "short.json",
        r#"{"resources": [9, 18], "users": [{"id": "A", "demand": [1]}]}"#,
    );
    let out = bin().arg("allocate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("demand has 1 entries"), "diagnostic was: {stderr}");
}

#[test]
fn missing_file_exits_3() {
    let out = bin()
        .args(["allocate", "/definitely/not/here.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "canonical.json", CANONICAL);

    let missing_arg = bin().arg("allocate").output().unwrap();
    assert_eq!(missing_arg.status.code(), Some(1));

    let unknown_algo = bin()
        .args(["allocate", "--algo", "wfq"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(unknown_algo.status.code(), Some(1));

    let trace_without_drf = bin()
        .args(["allocate", "--algo", "pdrf", "--trace", "/tmp/t.tsv"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(trace_without_drf.status.code(), Some(1));

    let finishing_with_drf = bin()
        .args(["allocate", "--finishing-pass"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(finishing_with_drf.status.code(), Some(1));

    let bad_range = bin()
        .args(["bench", "--demands", "1-9", "--out", "/tmp/unused"])
        .output()
        .unwrap();
    assert_eq!(bad_range.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_0() {
    for flag in ["--help", "--version"] {
        let out = bin().arg(flag).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{flag}");
    }
    let sub_help = bin().args(["bench", "--help"]).output().unwrap();
    assert_eq!(sub_help.status.code(), Some(0));
}

#[test]
fn compare_two_phase_depends_on_reference_mode() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "two_phase.json", TWO_PHASE);

    let strict = json_stdout(
        &bin()
            .args(["compare", "--drf-no-removal"])
            .arg(&path)
            .output()
            .unwrap(),
    );
    assert_eq!(strict["deltas"]["A"], 0);
    assert_eq!(strict["deltas"]["B"], 1);
    assert_eq!(strict["summary"]["over_by_1"], 1);

    let removal = json_stdout(&bin().arg("compare").arg(&path).output().unwrap());
    assert_eq!(removal["deltas"]["A"], 0);
    assert_eq!(removal["deltas"]["B"], -2);
    assert_eq!(removal["summary"]["under_by_2"], 1);
}

#[test]
fn compare_canonical_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "canonical.json", CANONICAL);
    let doc = json_stdout(&bin().arg("compare").arg(&path).output().unwrap());
    assert_eq!(doc["deltas"]["A"], 0);
    assert_eq!(doc["deltas"]["B"], 0);
    assert_eq!(doc["summary"]["max_under"], 0);
    assert_eq!(doc["summary"]["max_over"], 0);
}

#[test]
fn bench_writes_deterministic_exports() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "bench", "--users", "40", "--resources", "3", "--demands", "1:9", "--reserves",
        "100:200", "--trials", "2", "--seed", "11", "--out",
    ];
    let out1 = bin().args(args).arg(dir.path().join("a")).output().unwrap();
    assert!(out1.status.success());
    let out2 = bin().args(args).arg(dir.path().join("b")).output().unwrap();
    assert!(out2.status.success());

    for file in ["stats.csv", "stats.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical invocations");
    }
    // stdout carries the same CSV table that was written.
    let csv = std::fs::read(dir.path().join("a").join("stats.csv")).unwrap();
    assert_eq!(out1.stdout, csv);
}

#[test]
fn bench_single_trial_aggregates_equal_that_trial() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "bench", "--users", "40", "--resources", "3", "--demands", "1:9", "--reserves",
            "100:200", "--trials", "1", "--seed", "11", "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("stats.json")).unwrap()).unwrap();
    let trial = &doc["trials"][0];
    let agg = &doc["aggregates"];
    let under_total = trial["under_by_1"].as_u64().unwrap()
        + trial["under_by_2"].as_u64().unwrap()
        + trial["under_gt_2"].as_u64().unwrap();
    assert_eq!(agg["under_avg"].as_f64().unwrap(), under_total as f64);
    assert_eq!(agg["under_std"].as_f64().unwrap(), 0.0);
    assert_eq!(agg["max_under"], trial["max_under"]);
}

#[test]
fn cycles_json_reports_canonical_profile() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "canonical.json", CANONICAL);
    let doc = json_stdout(&bin().args(["cycles", "--json"]).arg(&path).output().unwrap());
    assert_eq!(doc["profile"]["lcm_share"], "2/3");
    assert_eq!(doc["profile"]["full_length"], "5");
    assert_eq!(doc["profile"]["occurrences"]["A"], "3");
    assert_eq!(doc["profile"]["occurrences"]["B"], "2");
    assert_eq!(doc["decomposition"], serde_json::Value::Null);
}

#[test]
fn cycles_decompose_single_resource_golden() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "single.json",
        r#"{"resources": [35], "users": [
            {"id": "a", "demand": [2]},
            {"id": "b", "demand": [4]},
            {"id": "c", "demand": [10]}
        ]}"#,
    );
    let doc = json_stdout(
        &bin()
            .args(["cycles", "--json", "--decompose"])
            .arg(&path)
            .output()
            .unwrap(),
    );
    let layers = doc["decomposition"]["layers"].as_array().unwrap();
    assert_eq!(layers.len(), 2);
    assert_eq!(layers[0]["consumed"][0], 26);
    assert_eq!(layers[1]["consumed"][0], 8);
    assert_eq!(doc["decomposition"]["residual"][0], 1);
}

#[test]
fn pareto_demo_tells_the_whole_story() {
    let out = bin().arg("pareto-demo").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("stopped after 10 grants (resource-exhausted)"));
    assert!(text.contains("residual [33, 3]"));
    assert!(text.contains("3 more B tasks"));
    assert!(text.contains("B: 11 tasks, amounts [33, 11]"));
    assert!(text.contains("residual [24, 0]"));
}

#[test]
fn input_files_are_never_modified() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "canonical.json", CANONICAL);
    for args in [vec!["allocate"], vec!["compare"], vec!["cycles", "--decompose"]] {
        let out = bin().args(args).arg(&path).output().unwrap();
        assert!(out.status.success());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), CANONICAL);
    }
}
