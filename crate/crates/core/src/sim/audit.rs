//! Re-derives a run's metrics from its event log and board, and checks the
//! log against the rules the run was supposed to follow.

use std::collections::BTreeMap;

use thiserror::Error;

use super::config::ScenarioConfig;
use super::event::{Event, EventKind};
use super::metrics::{first_window_violation, Metrics, Revocation};
use super::target::TargetState;
use crate::throttle::critical_mass;
use crate::types::{Pseudonym, Tick};
use crate::visibility::{first_broken, BoardEntry};

/// What a run left behind.
#[derive(Debug, Clone, Copy)]
pub struct Trace<'a> {
    pub events: &'a [Event],
    pub board: &'a [BoardEntry],
    pub metrics: &'a Metrics,
}

impl<'a> From<&'a super::RunOutput> for Trace<'a> {
    fn from(out: &'a super::RunOutput) -> Self {
        Trace {
            events: &out.events,
            board: &out.board,
            metrics: &out.metrics,
        }
    }
}

/// The first point where the trace disagrees with itself. `line` is the
/// 1-based event number, or 0 when the board is at fault.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("audit mismatch at event {line} `{event}`: {reason}")]
pub struct AuditMismatch {
    pub line: usize,
    pub event: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub metrics: Metrics,
    pub events_checked: usize,
}

#[derive(Default)]
struct Schedule {
    start: Tick,
    end: Tick,
    forbidden: bool,
}

pub fn replay_audit(trace: &Trace<'_>, config: &ScenarioConfig) -> Result<AuditReport, AuditMismatch> {
    let events = trace.events;
    let at = |line: usize, reason: String| AuditMismatch {
        line,
        event: events
            .get(line.wrapping_sub(1))
            .map_or_else(String::new, ToString::to_string),
        reason,
    };
    if let Some(i) = first_broken(trace.board) {
        return Err(AuditMismatch {
            line: 0,
            event: "board".into(),
            reason: format!("chain broken at entry {i}"),
        });
    }

    let mut m = Metrics {
        n_crit: critical_mass(config.target.declared_capacity, config.rate),
        ..Metrics::default()
    };
    let mut schedule: Option<Schedule> = None;
    let mut seen_scenario = false;
    let mut end: Option<Tick> = None;
    let mut last_tick = 0;
    let mut transitions: Vec<(Tick, TargetState)> = Vec::new();
    let mut admitted_ticks: BTreeMap<Pseudonym, Vec<Tick>> = BTreeMap::new();
    let mut rejected = 0u64;

    for (i, e) in events.iter().enumerate() {
        let line = i + 1;
        if end.is_some() {
            return Err(at(line, "event after end".into()));
        }
        if e.tick < last_tick {
            return Err(at(line, format!("tick {} precedes {last_tick}", e.tick)));
        }
        last_tick = e.tick;
        match &e.kind {
            EventKind::Scenario {
                seed,
                participants,
                duration,
            } => {
                if line != 1 {
                    return Err(at(line, "scenario header must come first".into()));
                }
                if *participants != config.participants || *duration != config.duration {
                    return Err(at(line, "header does not match the scenario".into()));
                }
                m.seed = *seed;
                m.participants = *participants;
                seen_scenario = true;
            }
            _ if !seen_scenario => return Err(at(line, "missing scenario header".into())),
            EventKind::Announced { window_ends, .. } => m.window_ends = Some(*window_ends),
            EventKind::Schedule { start, end, forbidden } => {
                schedule = Some(Schedule {
                    start: *start,
                    end: *end,
                    forbidden: *forbidden,
                });
                m.commencement = m
                    .window_ends
                    .map(|w| w.max(*start))
                    .filter(|&c| !*forbidden && c < *end);
            }
            EventKind::GossipConverged { item, round } if item == "manifest" => m.manifest_convergence = Some(*round),
            EventKind::Observe => {
                if m.observed_from.is_some() {
                    return Err(at(line, "observation started twice".into()));
                }
                m.observed_from = Some(e.tick);
            }
            EventKind::Admit {
                pseudonym,
                seq,
                board_index,
            } => {
                let s = schedule
                    .as_ref()
                    .ok_or_else(|| at(line, "admission before the schedule".into()))?;
                let open =
                    m.window_ends.is_some_and(|w| e.tick >= w) && e.tick >= s.start && e.tick < s.end && !s.forbidden;
                if !open {
                    return Err(at(
                        line,
                        format!("admission at {} while the assembly may not commence", e.tick),
                    ));
                }
                let prior = m.admitted.get(pseudonym).copied().unwrap_or(0);
                if *seq != prior {
                    return Err(at(line, format!("sequence {seq} after {prior} admissions")));
                }
                let entry = trace
                    .board
                    .get(*board_index as usize)
                    .ok_or_else(|| at(line, format!("board has no entry {board_index}")))?;
                let msg = &entry.message;
                if msg.pseudonym != *pseudonym || msg.sequence_no != *seq || msg.timestamp != e.tick {
                    return Err(at(line, format!("board entry {board_index} holds a different message")));
                }
                *m.admitted.entry(*pseudonym).or_insert(0) += 1;
                admitted_ticks.entry(*pseudonym).or_default().push(e.tick);
                m.first_admission.get_or_insert(e.tick);
                m.delivered += 1;
                m.mirrored += 1;
            }
            EventKind::Reject { reason, .. } => {
                *m.rejects.entry(reason.clone()).or_insert(0) += 1;
                rejected += 1;
            }
            EventKind::Target { state, .. } => {
                if m.observed_from.is_none() {
                    return Err(at(line, "target changed before observation".into()));
                }
                transitions.push((e.tick, *state));
                if *state == TargetState::Down && m.first_down.is_none() {
                    m.first_down = Some(e.tick);
                }
            }
            EventKind::Revealed {
                pseudonym,
                identity_digest,
            } => m.revocations.push(Revocation {
                pseudonym: *pseudonym,
                tick: e.tick,
                identity_digest: *identity_digest,
            }),
            EventKind::End => end = Some(e.tick),
            _ => {}
        }
    }

    let end_line = events.len();
    let end = end.ok_or_else(|| at(end_line, "trace has no end".into()))?;
    m.offered = m.admitted_total() + rejected;
    if let Some(from) = m.observed_from {
        m.observed_ticks = end - from;
        let (mut cursor, mut state) = (from, TargetState::Up);
        for &(t, s) in &transitions {
            if state == TargetState::Up {
                m.up_ticks += t - cursor;
            }
            cursor = t;
            state = s;
        }
        if state == TargetState::Up {
            m.up_ticks += end - cursor;
        }
    }

    for (p, ticks) in &admitted_ticks {
        if let Some((i, j)) = first_window_violation(ticks, config.rate, config.burst) {
            let line = nth_admit_line(events, p, j);
            return Err(at(
                line,
                format!(
                    "{} admissions between {} and {} exceed b + r*T",
                    j - i + 1,
                    ticks[i],
                    ticks[j]
                ),
            ));
        }
    }

    if let Some(field) = first_difference(&m, trace.metrics) {
        return Err(at(end_line, format!("reported {field} differs from the replay")));
    }
    Ok(AuditReport {
        metrics: m,
        events_checked: events.len(),
    })
}

fn nth_admit_line(events: &[Event], p: &Pseudonym, n: usize) -> usize {
    events
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(&e.kind, EventKind::Admit { pseudonym, .. } if pseudonym == p))
        .nth(n)
        .map_or(0, |(i, _)| i + 1)
}

fn first_difference(a: &Metrics, b: &Metrics) -> Option<&'static str> {
    let checks: [(&str, bool); 18] = [
        ("seed", a.seed == b.seed),
        ("participants", a.participants == b.participants),
        ("n_crit", a.n_crit == b.n_crit),
        ("window_ends", a.window_ends == b.window_ends),
        ("commencement", a.commencement == b.commencement),
        ("observed_from", a.observed_from == b.observed_from),
        ("observed_ticks", a.observed_ticks == b.observed_ticks),
        ("up_ticks", a.up_ticks == b.up_ticks),
        ("first_down", a.first_down == b.first_down),
        ("offered", a.offered == b.offered),
        ("admitted", a.admitted == b.admitted),
        ("rejects", a.rejects == b.rejects),
        ("delivered", a.delivered == b.delivered),
        ("mirrored", a.mirrored == b.mirrored),
        ("first_admission", a.first_admission == b.first_admission),
        ("revocations", a.revocations == b.revocations),
        ("manifest_convergence", a.manifest_convergence == b.manifest_convergence),
        ("everything", a == b),
    ];
    checks.iter().find(|(_, ok)| !ok).map(|(f, _)| *f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run, AdversaryKind, AdversarySpec};

    fn traced() -> (ScenarioConfig, crate::sim::RunOutput) {
        let mut cfg = ScenarioConfig::baseline("audit", 3, 12);
        cfg.adversaries = vec![AdversarySpec {
            name: "d".into(),
            kind: AdversaryKind::Disruptor { shares_submitted: 3 },
            count: 1,
            offset: -10,
        }];
        let out = run(&cfg).unwrap();
        (cfg, out)
    }

    #[test]
    fn clean_trace_replays_to_same_metrics() {
        let (cfg, out) = traced();
        let report = replay_audit(&Trace::from(&out), &cfg).unwrap();
        assert_eq!(report.metrics, out.metrics);
    }

    #[test]
    fn early_admission_is_caught_at_its_event() {
        let (cfg, out) = traced();
        let mut events = out.events.clone();
        let (i, _) = events
            .iter()
            .enumerate()
            .find(|(_, e)| matches!(e.kind, EventKind::Admit { .. }))
            .unwrap();
        // Keep ticks ordered: move every event up to the admission back too.
        let before = out.metrics.window_ends.unwrap() - 1;
        for e in events.iter_mut().take(i + 1).filter(|e| e.tick > before) {
            e.tick = before;
        }
        let trace = Trace {
            events: &events,
            ..Trace::from(&out)
        };
        let err = replay_audit(&trace, &cfg).unwrap_err();
        assert_eq!(err.line, i + 1);
    }

    #[test]
    fn tampered_metrics_and_board_are_caught() {
        let (cfg, out) = traced();
        let mut metrics = out.metrics.clone();
        metrics.up_ticks += 1;
        let trace = Trace {
            metrics: &metrics,
            ..Trace::from(&out)
        };
        assert!(replay_audit(&trace, &cfg).unwrap_err().reason.contains("up_ticks"));

        let mut board = out.board.clone();
        board[3].message.body.push('!');
        let trace = Trace {
            board: &board,
            ..Trace::from(&out)
        };
        assert_eq!(replay_audit(&trace, &cfg).unwrap_err().line, 0);
    }

    #[test]
    fn dropped_reject_breaks_reconciliation() {
        let (cfg, out) = traced();
        let mut events = out.events.clone();
        let i = events
            .iter()
            .position(|e| matches!(e.kind, EventKind::Reject { .. }))
            .unwrap();
        events.remove(i);
        let trace = Trace {
            events: &events,
            ..Trace::from(&out)
        };
        assert!(replay_audit(&trace, &cfg).is_err());
    }
}
