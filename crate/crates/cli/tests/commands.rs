use std::path::{Path, PathBuf};
use std::process::Command;

use assemblynet_cli::{board_verify_text, check_text, resolve_seed};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn assemblynet(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_assemblynet"))
        .args(args)
        .env_remove("ASSEMBLYNET_SEED")
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exited"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compliant_manifest_prints_nine_verdicts() {
    let (code, stdout, _) = assemblynet(&["check", path_str(&example("compliant.manifest"))]);
    assert_eq!(code, 0);
    let verdicts = stdout
        .lines()
        .filter(|l| l.ends_with(')') && (l.contains(": PASS") || l.contains(": ATTESTED")))
        .count();
    assert_eq!(verdicts, 9, "{stdout}");
}

#[test]
fn empty_opinion_fails_expression() {
    let (code, stdout, _) = assemblynet(&["check", path_str(&example("no_opinion.manifest"))]);
    assert_eq!(code, 1);
    assert!(stdout.contains("expression of opinion: FAIL"));
}

#[test]
fn critical_infrastructure_fails_proportionality() {
    let (code, stdout, _) = assemblynet(&["check", path_str(&example("infrastructure.manifest"))]);
    assert_eq!(code, 1);
    assert!(stdout.contains("proportionality: FAIL"));
}

#[test]
fn truncated_manifest_is_a_parse_error_with_position() {
    let (code, _, stderr) = assemblynet(&["check", path_str(&example("truncated.manifest"))]);
    assert_eq!(code, 2);
    assert!(stderr.contains("truncated.manifest:10:1:"), "{stderr}");
}

#[test]
fn missing_file_and_bad_usage_exit_2() {
    assert_eq!(assemblynet(&["check", "/nonexistent/x.manifest"]).0, 2);
    assert_eq!(assemblynet(&["frobnicate"]).0, 2);
    assert_eq!(assemblynet(&[]).0, 2);
}

#[test]
fn critical_mass_scenario_reports_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = assemblynet(&[
        "simulate",
        path_str(&example("critical_mass.scenario")),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("at or above critical mass 50"));
    assert!(stdout.contains("time_to_down: 10"));
    assert!(stdout.contains("audit: clean"));
    for f in ["events.log", "timeline.csv", "board.csv", "summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let timeline = std::fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
    assert!(timeline.starts_with("tick,arrivals,served,dropped,queue,state\n"));
}

#[test]
fn equal_seeds_give_identical_logs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let scenario = example("adversarial.scenario");
    for d in [&a, &b] {
        let (code, ..) = assemblynet(&["simulate", path_str(&scenario), "--out", path_str(d.path())]);
        assert_eq!(code, 0);
    }
    for f in ["events.log", "timeline.csv", "board.csv", "summary.txt"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_flag_overrides_file_and_environment() {
    assert_eq!(resolve_seed(Some(1), Some(2), Some(3)), 1);
    assert_eq!(resolve_seed(None, Some(2), Some(3)), 2);
    assert_eq!(resolve_seed(None, None, Some(3)), 3);
    assert_eq!(resolve_seed(None, None, None), 0);

    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.scenario");
    std::fs::write(&scenario, "participants = 12\n").unwrap();
    let seed_of = |env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join("out");
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_assemblynet"));
        cmd.args(["simulate", path_str(&scenario), "--out", path_str(&out)]);
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        match env {
            Some(v) => cmd.env("ASSEMBLYNET_SEED", v),
            None => cmd.env_remove("ASSEMBLYNET_SEED"),
        };
        let output = cmd.output().unwrap();
        let log = std::fs::read_to_string(out.join("events.log")).unwrap_or_default();
        (
            output.status.code().unwrap(),
            log.lines().next().unwrap_or("").to_string(),
        )
    };
    assert_eq!(seed_of(Some("77"), None), (0, "0,scenario,77,12,345780".into()));
    assert_eq!(seed_of(Some("77"), Some("5")), (0, "0,scenario,5,12,345780".into()));
    assert_eq!(seed_of(None, None), (0, "0,scenario,0,12,345780".into()));
    assert_eq!(seed_of(Some("nope"), None).0, 2);
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = assemblynet(&[
        "simulate",
        path_str(&example("bad_threshold.scenario")),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("k=4, n=3"), "{stderr}");
}

#[test]
fn board_from_clean_run_verifies_and_tampering_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let (code, ..) = assemblynet(&[
        "simulate",
        path_str(&example("ring.scenario")),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code, 0);
    let board = dir.path().join("board.csv");
    assert_eq!(assemblynet(&["board-verify", path_str(&board)]).0, 0);

    // Alter one hex digit of entry 7's stored digest.
    let text = std::fs::read_to_string(&board).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let field_start = lines[7].find(',').unwrap() + 1 + 64 + 1;
    let mut bytes = lines[7].clone().into_bytes();
    bytes[field_start] = if bytes[field_start] == b'0' { b'1' } else { b'0' };
    lines[7] = String::from_utf8(bytes).unwrap();
    let tampered = dir.path().join("tampered.csv");
    std::fs::write(&tampered, lines.join("\n") + "\n").unwrap();
    let (code, stdout, _) = assemblynet(&["board-verify", path_str(&tampered)]);
    assert_eq!(code, 1);
    assert!(stdout.contains("broken at entry 7"), "{stdout}");
}

#[test]
fn empty_board_is_valid_and_garbage_is_malformed() {
    assert_eq!(board_verify_text("").code, 0);
    assert_eq!(board_verify_text("not a board\n").code, 2);
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(assemblynet(&["board-verify", path_str(&empty)]).0, 0);
}

#[test]
fn check_text_reports_origin() {
    let out = check_text("assembly_id = zz\n", "inline");
    assert_eq!(out.code, 2);
    assert!(out.report.starts_with("inline:1:"), "{}", out.report);
}
