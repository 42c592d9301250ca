//! Event log records: `tick,event_kind,fields...`, one per line.

use std::fmt;
use std::str::FromStr;

use super::target::TargetState;
use crate::crypto::Digest;
use crate::types::{Pseudonym, Tick};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Scenario {
        seed: u64,
        participants: u64,
        duration: Tick,
    },
    AnnounceAttempt {
        attempt: u32,
        ok: bool,
    },
    Announced {
        proof: String,
        delivered_at: Tick,
        window_ends: Tick,
    },
    NotCompliant {
        failed: u32,
    },
    AnnounceFailed,
    Injunction {
        decision: String,
        outcome: String,
    },
    Schedule {
        start: Tick,
        end: Tick,
        forbidden: bool,
    },
    Enroll {
        pseudonym: Pseudonym,
        role: String,
    },
    IssuanceRejected {
        role: String,
        reason: String,
    },
    GossipRound {
        item: String,
        round: u64,
        knowing: usize,
    },
    GossipConverged {
        item: String,
        round: u64,
    },
    Observe,
    Admit {
        pseudonym: Pseudonym,
        seq: u64,
        board_index: u64,
    },
    Reject {
        pseudonym: Pseudonym,
        reason: String,
    },
    Target {
        state: TargetState,
        queue: u64,
    },
    CaseOpened {
        pseudonym: Pseudonym,
        initiator: String,
    },
    ShareSubmitted {
        pseudonym: Pseudonym,
        holder: u16,
        count: usize,
    },
    Revealed {
        pseudonym: Pseudonym,
        identity_digest: Digest,
    },
    SupervisorNotified {
        pseudonym: Pseudonym,
    },
    Barred {
        pseudonym: Pseudonym,
        n_active: u64,
    },
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub tick: Tick,
    pub kind: EventKind,
}

impl Event {
    pub fn new(tick: Tick, kind: EventKind) -> Self {
        Event { tick, kind }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use EventKind::*;
        write!(f, "{},", self.tick)?;
        match &self.kind {
            Scenario {
                seed,
                participants,
                duration,
            } => write!(f, "scenario,{seed},{participants},{duration}"),
            AnnounceAttempt { attempt, ok } => {
                write!(f, "announce_attempt,{attempt},{}", if *ok { "ok" } else { "fail" })
            }
            Announced {
                proof,
                delivered_at,
                window_ends,
            } => write!(f, "announced,{proof},{delivered_at},{window_ends}"),
            NotCompliant { failed } => write!(f, "not_compliant,{failed}"),
            AnnounceFailed => write!(f, "announce_failed"),
            Injunction { decision, outcome } => write!(f, "injunction,{decision},{outcome}"),
            Schedule { start, end, forbidden } => write!(f, "schedule,{start},{end},{forbidden}"),
            Enroll { pseudonym, role } => write!(f, "enroll,{pseudonym},{role}"),
            IssuanceRejected { role, reason } => write!(f, "issuance_rejected,{role},{reason}"),
            GossipRound { item, round, knowing } => write!(f, "gossip_round,{item},{round},{knowing}"),
            GossipConverged { item, round } => write!(f, "gossip_converged,{item},{round}"),
            Observe => write!(f, "observe"),
            Admit {
                pseudonym,
                seq,
                board_index,
            } => write!(f, "admit,{pseudonym},{seq},{board_index}"),
            Reject { pseudonym, reason } => write!(f, "reject,{pseudonym},{reason}"),
            Target { state, queue } => write!(f, "target,{state},{queue}"),
            CaseOpened { pseudonym, initiator } => write!(f, "case_opened,{pseudonym},{initiator}"),
            ShareSubmitted {
                pseudonym,
                holder,
                count,
            } => write!(f, "share_submitted,{pseudonym},{holder},{count}"),
            Revealed {
                pseudonym,
                identity_digest,
            } => write!(f, "revealed,{pseudonym},{identity_digest}"),
            SupervisorNotified { pseudonym } => write!(f, "supervisor_notified,{pseudonym}"),
            Barred { pseudonym, n_active } => write!(f, "barred,{pseudonym},{n_active}"),
            End => write!(f, "end"),
        }
    }
}

fn field<T: FromStr>(fields: &[&str], i: usize, what: &str) -> Result<T, String> {
    fields
        .get(i)
        .ok_or_else(|| format!("missing field {what}"))?
        .parse()
        .map_err(|_| format!("bad {what} `{}`", fields[i]))
}

fn word(fields: &[&str], i: usize, what: &str) -> Result<String, String> {
    fields
        .get(i)
        .map(|s| s.to_string())
        .ok_or_else(|| format!("missing field {what}"))
}

impl FromStr for Event {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        use EventKind::*;
        let fields: Vec<&str> = line.split(',').collect();
        let tick: Tick = field(&fields, 0, "tick")?;
        let kind_name = fields.get(1).ok_or("missing event kind")?;
        let f = &fields[2..];
        let expect = |n: usize| {
            if f.len() == n {
                Ok(())
            } else {
                Err(format!("`{kind_name}` takes {n} fields, found {}", f.len()))
            }
        };
        let kind = match *kind_name {
            "scenario" => {
                expect(3)?;
                Scenario {
                    seed: field(f, 0, "seed")?,
                    participants: field(f, 1, "participants")?,
                    duration: field(f, 2, "duration")?,
                }
            }
            "announce_attempt" => {
                expect(2)?;
                AnnounceAttempt {
                    attempt: field(f, 0, "attempt")?,
                    ok: match f[1] {
                        "ok" => true,
                        "fail" => false,
                        other => return Err(format!("bad attempt outcome `{other}`")),
                    },
                }
            }
            "announced" => {
                expect(3)?;
                Announced {
                    proof: word(f, 0, "proof")?,
                    delivered_at: field(f, 1, "delivered_at")?,
                    window_ends: field(f, 2, "window_ends")?,
                }
            }
            "not_compliant" => {
                expect(1)?;
                NotCompliant {
                    failed: field(f, 0, "failed")?,
                }
            }
            "announce_failed" => {
                expect(0)?;
                AnnounceFailed
            }
            "injunction" => {
                expect(2)?;
                Injunction {
                    decision: word(f, 0, "decision")?,
                    outcome: word(f, 1, "outcome")?,
                }
            }
            "schedule" => {
                expect(3)?;
                Schedule {
                    start: field(f, 0, "start")?,
                    end: field(f, 1, "end")?,
                    forbidden: field(f, 2, "forbidden")?,
                }
            }
            "enroll" => {
                expect(2)?;
                Enroll {
                    pseudonym: field(f, 0, "pseudonym")?,
                    role: word(f, 1, "role")?,
                }
            }
            "issuance_rejected" => {
                expect(2)?;
                IssuanceRejected {
                    role: word(f, 0, "role")?,
                    reason: word(f, 1, "reason")?,
                }
            }
            "gossip_round" => {
                expect(3)?;
                GossipRound {
                    item: word(f, 0, "item")?,
                    round: field(f, 1, "round")?,
                    knowing: field(f, 2, "knowing")?,
                }
            }
            "gossip_converged" => {
                expect(2)?;
                GossipConverged {
                    item: word(f, 0, "item")?,
                    round: field(f, 1, "round")?,
                }
            }
            "observe" => {
                expect(0)?;
                Observe
            }
            "admit" => {
                expect(3)?;
                Admit {
                    pseudonym: field(f, 0, "pseudonym")?,
                    seq: field(f, 1, "seq")?,
                    board_index: field(f, 2, "board_index")?,
                }
            }
            "reject" => {
                expect(2)?;
                Reject {
                    pseudonym: field(f, 0, "pseudonym")?,
                    reason: word(f, 1, "reason")?,
                }
            }
            "target" => {
                expect(2)?;
                Target {
                    state: field(f, 0, "state")?,
                    queue: field(f, 1, "queue")?,
                }
            }
            "case_opened" => {
                expect(2)?;
                CaseOpened {
                    pseudonym: field(f, 0, "pseudonym")?,
                    initiator: word(f, 1, "initiator")?,
                }
            }
            "share_submitted" => {
                expect(3)?;
                ShareSubmitted {
                    pseudonym: field(f, 0, "pseudonym")?,
                    holder: field(f, 1, "holder")?,
                    count: field(f, 2, "count")?,
                }
            }
            "revealed" => {
                expect(2)?;
                Revealed {
                    pseudonym: field(f, 0, "pseudonym")?,
                    identity_digest: field(f, 1, "identity_digest")?,
                }
            }
            "supervisor_notified" => {
                expect(1)?;
                SupervisorNotified {
                    pseudonym: field(f, 0, "pseudonym")?,
                }
            }
            "barred" => {
                expect(2)?;
                Barred {
                    pseudonym: field(f, 0, "pseudonym")?,
                    n_active: field(f, 1, "n_active")?,
                }
            }
            "end" => {
                expect(0)?;
                End
            }
            other => return Err(format!("unknown event kind `{other}`")),
        };
        Ok(Event { tick, kind })
    }
}

pub fn format_log(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

/// Parses a log; errors carry the 1-based line number.
pub fn parse_log(text: &str) -> Result<Vec<Event>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| l.parse().map_err(|e| (i + 1, e)))
        .collect()
}
