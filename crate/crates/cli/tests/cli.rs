//! End-to-end checks of the command-line binary: exit codes, report shapes,
//! artifact files, and byte-level determinism across repeat runs.

use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use vlasolve::lower::{count_step, Strategy};

fn run(args: &[&str], envs: &[(&str, &str)], dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vlasolve"));
    cmd.args(args).current_dir(dir);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn verify_defaults_passes_and_reports_scales() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], &[], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["command"], "verify");
    assert_eq!(v["all_passed"], true);
    let scales = &v["scales"];
    for key in ["s_F", "s_C", "s"] {
        assert!(scales[key].as_f64().unwrap() > 0.0, "missing scale {key}");
    }
    // Full scale is the sum of the branch weights plus the drive frequency.
    let total = scales["s_F"].as_f64().unwrap()
        + scales["s_C"].as_f64().unwrap()
        + v["omega0"].as_f64().unwrap();
    assert!((scales["s"].as_f64().unwrap() - total).abs() < 1e-12);
    assert!(!v["encodings"].as_array().unwrap().is_empty());
}

#[test]
fn undersized_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--nx", "2", "--nv", "2"], &[], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("invalid grid"), "{}", stderr(&out));
}

#[test]
fn oversized_verify_suggests_count_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--nx", "6", "--nv", "4"], &[], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("count-only"), "{}", stderr(&out));
}

#[test]
fn count_only_mode_routes_a_large_solve_to_counting() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        run(&["solve", "--nx", "6", "--nv", "4", "--mode=count-only"], &[], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["command"], "solve");
    assert_eq!(v["mode"], "count-only");
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn underestimated_kappa_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--kappa", "40", "--eps", "1e-2"], &[], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["pass"], false);
    assert!(v["fidelity"].as_f64().unwrap() < 0.99);
    assert!(v["diagnostic"].as_str().unwrap().contains("kappa"));
    assert!(stderr(&out).contains("below"), "{}", stderr(&out));
}

#[test]
fn diagonal_solve_passes_and_dumps_the_solution() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("diag.toml"),
        "advection = false\ncoupling = false\nkappa = 1.3\nsolution_dump = \"state.bin\"\n",
    )
    .unwrap();
    let out = run(&["solve", "--config", "diag.toml"], &[], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert!(v["fidelity"].as_f64().unwrap() >= 1.0 - 1e-6);
    // Flag overrides the file value and echoes into the report.
    assert_eq!(v["eps"].as_f64().unwrap(), 1e-3);
    let dump = fs::read(dir.path().join("state.bin")).unwrap();
    assert!(!dump.is_empty());
}

#[test]
fn count_rows_match_the_library_and_the_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["count", "--nx", "3", "--nv", "2"], &[], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for (row, strategy) in rows.iter().zip(Strategy::ALL) {
        let want = count_step::<f64>(3, 2, strategy).unwrap();
        assert_eq!(row["strategy"], strategy.as_str());
        assert_eq!(row["cx_count"].as_u64().unwrap() as usize, want.cx_count);
        assert_eq!(row["width"].as_u64().unwrap() as usize, want.width);
        assert_eq!(row["depth"].as_u64().unwrap() as usize, want.depth);
        assert_eq!(row["ancillas"].as_u64().unwrap() as usize, want.ancillas);
    }
    let csv = v["csv"].as_str().unwrap();
    assert!(csv.starts_with("n_x,n_v,strategy,cx_count,width,depth\n"));
}

#[test]
fn strategy_flag_filters_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sizes.toml"), "sizes = [[3, 2], [4, 2]]\n").unwrap();
    let out = run(
        &["sweep", "--config", "sizes.toml", "--strategy", "optimized"],
        &[],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["strategy"] == "optimized"));

    let bad = run(&["sweep", "--strategy", "turbo"], &[], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("unknown strategy"), "{}", stderr(&bad));
}

#[test]
fn sweep_artifacts_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sizes.toml"), "sizes = [[3, 2], [3, 3], [4, 2]]\n").unwrap();
    let args = |out: &str| {
        ["sweep", "--config", "sizes.toml", "--out", out].map(String::from).to_vec()
    };
    let a = run(
        &args("a.json").iter().map(String::as_str).collect::<Vec<_>>(),
        &[("VLASOLVE_THREADS", "1")],
        dir.path(),
    );
    let b = run(
        &args("b.json").iter().map(String::as_str).collect::<Vec<_>>(),
        &[("VLASOLVE_THREADS", "3")],
        dir.path(),
    );
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    assert!(a.stdout.is_empty(), "report went to the file, not stdout");
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.csv"), read("b.csv"));
    let csv = String::from_utf8(read("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7, "header plus one line per size and strategy");
}

#[test]
fn bad_thread_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["count"], &[("VLASOLVE_THREADS", "zero")], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("VLASOLVE_THREADS"), "{}", stderr(&out));
}
