//! End-to-end checks of the `evodyn` binary: exit codes, artifacts on disk,
//! and report text, exercised exactly the way a shell user would.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evodyn"))
}

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn smoke_config(dir: &Path) -> PathBuf {
    let out = dir.display();
    let text = format!(
        "name = smoke\n\
         description = fast crowding-game check\n\
         n = 3\n\
         [game]\n\
         matrix = -1, 0, 0; 0, -1, 0; 0, 0, -1\n\
         offset = 1, 1, 1\n\
         [rule]\n\
         preset = smith\n\
         [initial]\n\
         x = 0.7, 0.2, 0.1\n\
         [integrator]\n\
         method = rk4_fixed\n\
         dt = 0.01\n\
         t_max = 2\n\
         [outputs]\n\
         csv_dir = {out}/csv\n\
         svg_path = {out}/plot.svg\n\
         report_path = {out}/report.txt\n\
         certify_report_path = {out}/certify.txt\n\
         [certify]\n\
         samples = 300\n\
         seed = 11\n"
    );
    let path = dir.join("smoke.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn lists_bundled_scenarios() {
    let out = bin()
        .arg("list-scenarios")
        .env("EVODYN_SCENARIO_DIR", scenarios_dir())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for name in [
        "coordination_remark5",
        "fox83_remark5",
        "paper_sec5",
        "skew_rps",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn empty_scenario_dir_exits_1_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("list-scenarios")
        .env("EVODYN_SCENARIO_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no .cfg files"), "{}", stderr(&out));
}

#[test]
fn unknown_config_exits_2() {
    let out = bin()
        .args(["simulate", "no_such_scenario"])
        .env("EVODYN_SCENARIO_DIR", scenarios_dir())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not found"), "{}", stderr(&out));
}

#[test]
fn cone_violating_config_exits_2_naming_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(
        &path,
        "n = 3\n[game]\nmatrix = -1,0,0;0,-1,0;0,0,-1\noffset = 1,1,1\n\
         [rule]\npreset = pure_replicator\n[initial]\nx = 0.5, 0.3, 0.2\n",
    )
    .unwrap();
    let out = bin().arg("simulate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("cone"), "constraint not named: {err}");
    assert!(err.contains("--pure-replicator"), "escape hatch not named: {err}");
}

#[test]
fn malformed_config_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.cfg");
    std::fs::write(&path, "n = 3\n[game]\nmatrix is not a key-value line\n").unwrap();
    let out = bin().arg("simulate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn simulate_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path());

    let first = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(first.status.code(), Some(0), "stderr: {}", stderr(&first));
    let csv = dir.path().join("csv/run_01_smith_x1.csv");
    let svg = dir.path().join("plot.svg");
    let report = dir.path().join("report.txt");
    assert!(csv.is_file(), "missing {}", csv.display());
    assert!(svg.is_file(), "missing {}", svg.display());
    assert!(report.is_file(), "missing {}", report.display());

    let report_text = std::fs::read_to_string(&report).unwrap();
    assert!(report_text.contains("status = ok"), "{report_text}");
    assert!(report_text.contains("summary_completed = 1"), "{report_text}");

    let svg_first = std::fs::read(&svg).unwrap();
    let second = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(second.status.code(), Some(0));
    let svg_second = std::fs::read(&svg).unwrap();
    assert_eq!(svg_first, svg_second, "plot bytes changed between runs");
    assert!(
        svg_first.starts_with(b"<svg"),
        "plot does not start with an svg tag"
    );
}

#[test]
fn certify_failure_verdicts_still_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["certify", "skew_rps"])
        .env("EVODYN_SCENARIO_DIR", scenarios_dir())
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("ccw: fail ["), "no drift verdict in:\n{text}");
    assert!(
        text.contains("pc[heavy_replicator]: pass"),
        "missing correlation verdict in:\n{text}"
    );
    assert!(
        dir.path().join("out/skew_rps/certify_report.txt").is_file(),
        "report file not written"
    );
}

#[test]
fn certify_pure_replicator_flag_adds_the_gated_rule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path());
    let out = bin()
        .arg("certify")
        .arg(&cfg)
        .arg("--pure-replicator")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("pc[pure_replicator]: pass"),
        "correlation line missing:\n{text}"
    );
    assert!(
        text.contains("ns[pure_replicator]: fail [RestPointNotEquilibrium"),
        "stationarity witness missing:\n{text}"
    );
    let report = std::fs::read_to_string(dir.path().join("certify.txt")).unwrap();
    assert!(report.contains("ns[pure_replicator]: fail"));
}

#[test]
fn certify_washout_scenario_reports_frequency_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["certify", "paper_sec5"])
        .env("EVODYN_SCENARIO_DIR", scenarios_dir())
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("ni_frequency: pass"), "{text}");
    assert!(
        text.contains("ccw: certified-by-construction"),
        "{text}"
    );
    for label in ["bnn", "smith", "replicator_smith"] {
        assert!(text.contains(&format!("pc[{label}]: pass")), "{text}");
        assert!(text.contains(&format!("ns[{label}]: pass")), "{text}");
    }
}
