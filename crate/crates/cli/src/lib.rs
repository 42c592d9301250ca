//! The `assemblynet` commands, as functions that return their exit code and
//! report instead of printing.

use std::fs;
use std::path::{Path, PathBuf};

use assemblynet::assembly::{check_manifest, AssemblyManifest};
use assemblynet::kvfile::Document;
use assemblynet::sim::{self, replay_audit, ScenarioConfig, Trace};
use assemblynet::visibility::{first_broken, parse_board_export};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable consulted for a seed when neither the command line
/// nor the scenario file sets one.
pub const SEED_ENV: &str = "ASSEMBLYNET_SEED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub code: i32,
    pub report: String,
    pub artifacts: Vec<PathBuf>,
}

impl CommandOutcome {
    fn new(code: i32, report: impl Into<String>) -> Self {
        CommandOutcome {
            code,
            report: report.into(),
            artifacts: Vec::new(),
        }
    }

    fn usage(report: impl Into<String>) -> Self {
        CommandOutcome::new(EXIT_USAGE, report)
    }
}

fn read_text(path: &Path) -> Result<String, CommandOutcome> {
    let bytes = fs::read(path).map_err(|e| CommandOutcome::usage(format!("{}: {e}", path.display())))?;
    String::from_utf8(bytes).map_err(|_| CommandOutcome::usage(format!("{}: not valid UTF-8", path.display())))
}

pub fn cmd_check(path: &Path) -> CommandOutcome {
    match read_text(path) {
        Ok(text) => check_text(&text, &path.display().to_string()),
        Err(o) => o,
    }
}

/// Checks manifest text; `origin` prefixes diagnostics.
pub fn check_text(text: &str, origin: &str) -> CommandOutcome {
    let manifest = match AssemblyManifest::parse(text) {
        Ok(m) => m,
        Err(e) => return CommandOutcome::usage(format!("{origin}:{e}")),
    };
    match check_manifest(&manifest) {
        Ok(report) => {
            let code = if report.is_compliant() { EXIT_OK } else { EXIT_VIOLATION };
            CommandOutcome::new(code, format!("{report}\n"))
        }
        Err(e) => CommandOutcome::usage(format!("{origin}: {e}")),
    }
}

/// `--seed`, then the file's own `seed`, then [`SEED_ENV`], then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env: Option<u64>) -> u64 {
    flag.or(file).or(env).unwrap_or(0)
}

pub fn cmd_simulate(path: &Path, out_dir: &Path, seed_flag: Option<u64>, seed_env: Option<u64>) -> CommandOutcome {
    let text = match read_text(path) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let origin = path.display();
    let mut cfg = match ScenarioConfig::parse(&text, path.parent()) {
        Ok(c) => c,
        Err(e) => return CommandOutcome::usage(format!("{origin}:{e}")),
    };
    let file_has_seed = Document::parse(&text)
        .ok()
        .and_then(|d| d.section(None).map(|s| s.entries.iter().any(|e| e.key == "seed")))
        .unwrap_or(false);
    cfg.seed = resolve_seed(seed_flag, file_has_seed.then_some(cfg.seed), seed_env);

    let out = match sim::run(&cfg) {
        Ok(o) => o,
        Err(e) => return CommandOutcome::usage(format!("{origin}: {e}")),
    };
    let audit = replay_audit(&Trace::from(&out), &cfg);

    if let Err(e) = fs::create_dir_all(out_dir) {
        return CommandOutcome::usage(format!("{}: {e}", out_dir.display()));
    }
    let mut report = out.summary(&cfg);
    match &audit {
        Ok(a) => report.push_str(&format!("audit: clean ({} events)\n", a.events_checked)),
        Err(e) => report.push_str(&format!("audit: {e}\n")),
    }
    let files = [
        ("events.log", out.event_log()),
        ("timeline.csv", out.timeline_csv()),
        ("board.csv", out.board_export()),
        ("summary.txt", report.clone()),
    ];
    let mut artifacts = Vec::new();
    for (name, body) in files {
        let p = out_dir.join(name);
        if let Err(e) = fs::write(&p, body) {
            return CommandOutcome::usage(format!("{}: {e}", p.display()));
        }
        artifacts.push(p);
    }
    let code = if out.violations.is_empty() && audit.is_ok() {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    };
    CommandOutcome {
        code,
        report,
        artifacts,
    }
}

pub fn cmd_board_verify(path: &Path) -> CommandOutcome {
    match read_text(path) {
        Ok(text) => board_verify_text(&text),
        Err(o) => o,
    }
}

pub fn board_verify_text(text: &str) -> CommandOutcome {
    let entries = match parse_board_export(text) {
        Ok(e) => e,
        Err(e) => return CommandOutcome::usage(format!("malformed board: line {}: {}", e.line, e.message)),
    };
    match first_broken(&entries) {
        None => CommandOutcome::new(EXIT_OK, format!("board ok: {} entries\n", entries.len())),
        Some(i) => CommandOutcome::new(EXIT_VIOLATION, format!("board broken at entry {i}\n")),
    }
}
