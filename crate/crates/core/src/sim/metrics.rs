use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::target::StepOutcome;
use crate::crypto::Digest;
use crate::types::{Pseudonym, Rate, Tick};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revocation {
    pub pseudonym: Pseudonym,
    pub tick: Tick,
    pub identity_digest: Digest,
}

/// Everything a run reports. All of it can be recomputed from the event log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub seed: u64,
    pub participants: u64,
    pub n_crit: u64,
    pub window_ends: Option<Tick>,
    pub commencement: Option<Tick>,
    /// First tick the target was observed; `None` if no traffic was ever due.
    pub observed_from: Option<Tick>,
    pub observed_ticks: u64,
    pub up_ticks: u64,
    pub first_down: Option<Tick>,
    pub offered: u64,
    pub admitted: BTreeMap<Pseudonym, u64>,
    pub rejects: BTreeMap<String, u64>,
    pub delivered: u64,
    pub mirrored: u64,
    pub first_admission: Option<Tick>,
    pub revocations: Vec<Revocation>,
    pub manifest_convergence: Option<u64>,
}

impl Metrics {
    /// Fraction of observed ticks the target was fully up.
    pub fn availability(&self) -> f64 {
        if self.observed_ticks == 0 {
            1.0
        } else {
            self.up_ticks as f64 / self.observed_ticks as f64
        }
    }

    pub fn visibility_fraction(&self) -> f64 {
        if self.delivered == 0 {
            1.0
        } else {
            self.mirrored as f64 / self.delivered as f64
        }
    }

    /// Ticks of traffic until the target first went down, counting the tick
    /// it went down in.
    pub fn time_to_down(&self) -> Option<Tick> {
        Some(self.first_down? + 1 - self.observed_from?)
    }

    pub fn admitted_total(&self) -> u64 {
        self.admitted.values().sum()
    }

    pub fn rejected_total(&self) -> u64 {
        self.rejects.values().sum()
    }

    pub fn summary(&self, name: &str, rate: Rate, violations: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {name}");
        let _ = writeln!(s, "seed: {}", self.seed);
        let cmp = if self.participants < self.n_crit {
            "below"
        } else {
            "at or above"
        };
        let _ = writeln!(
            s,
            "participants: {} ({cmp} critical mass {} at rate {rate})",
            self.participants, self.n_crit
        );
        let opt = |t: Option<Tick>| t.map_or("none".to_string(), |t| t.to_string());
        let _ = writeln!(s, "window_ends: {}", opt(self.window_ends));
        let _ = writeln!(s, "commencement: {}", opt(self.commencement));
        let _ = writeln!(s, "first_admission: {}", opt(self.first_admission));
        let _ = writeln!(
            s,
            "availability: {:.6} ({} of {} ticks up)",
            self.availability(),
            self.up_ticks,
            self.observed_ticks
        );
        let _ = writeln!(s, "time_to_down: {}", opt(self.time_to_down()));
        let _ = writeln!(
            s,
            "visibility: {:.6} ({} of {} delivered messages mirrored)",
            self.visibility_fraction(),
            self.mirrored,
            self.delivered
        );
        let _ = writeln!(
            s,
            "offered: {} admitted: {} rejected: {}",
            self.offered,
            self.admitted_total(),
            self.rejected_total()
        );
        for (reason, n) in &self.rejects {
            let _ = writeln!(s, "  reject {reason}: {n}");
        }
        let max = self.admitted.values().max().copied().unwrap_or(0);
        let _ = writeln!(s, "max admitted per pseudonym: {max}");
        let _ = writeln!(s, "manifest_convergence_round: {}", opt(self.manifest_convergence));
        let _ = writeln!(s, "revocations: {}", self.revocations.len());
        for r in &self.revocations {
            let _ = writeln!(s, "  {} at {} identity {}", r.pseudonym, r.tick, r.identity_digest);
        }
        if violations.is_empty() {
            let _ = writeln!(s, "invariants: held");
        } else {
            let _ = writeln!(s, "invariants: {} violated", violations.len());
            for v in violations {
                let _ = writeln!(s, "  {v}");
            }
        }
        s
    }
}

pub fn timeline_csv(timeline: &[(Tick, StepOutcome)]) -> String {
    let mut s = String::from("tick,arrivals,served,dropped,queue,state\n");
    for (t, o) in timeline {
        let _ = writeln!(
            s,
            "{t},{},{},{},{},{}",
            o.arrivals, o.served, o.dropped, o.queue, o.state
        );
    }
    s
}

/// True iff no window of admissions exceeds `burst + rate * span`, where the
/// span is measured between the first and last admission in the window.
/// `ticks` must be sorted.
pub fn window_bound_holds(ticks: &[Tick], rate: Rate, burst: u64) -> bool {
    first_window_violation(ticks, rate, burst).is_none()
}

/// `(i, j)` of the first window `ticks[i..=j]` over the bound.
///
/// The bound `(j - i + 1 - b) * den <= num * (t_j - t_i)` rearranges to
/// `g(i) >= (j + 1 - b) * den - num * t_j` with `g(i) = i * den - num * t_i`,
/// so a running minimum of `g` checks every window in one pass.
pub fn first_window_violation(ticks: &[Tick], rate: Rate, burst: u64) -> Option<(usize, usize)> {
    let (num, den) = (rate.num() as i128, rate.den() as i128);
    let mut best: Option<(i128, usize)> = None;
    for (j, &tj) in ticks.iter().enumerate() {
        let g = j as i128 * den - num * tj as i128;
        if best.is_none_or(|(m, _)| g < m) {
            best = Some((g, j));
        }
        let (m, i) = best.expect("set above");
        let h = (j as i128 + 1 - burst as i128) * den - num * tj as i128;
        if m < h {
            return Some((i, j));
        }
    }
    None
}
