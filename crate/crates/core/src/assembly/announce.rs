//! Provable announcement, the injunction window, and the commencement gate.

use std::fmt;

use thiserror::Error;

use super::compliance::{check_manifest_with, CompliancePolicy};
use super::manifest::AssemblyManifest;
use crate::crypto::{hmac_sha256, Digest};
use crate::types::{Pseudonym, Tick, SECONDS_PER_DAY};
use crate::visibility::{Board, ProtestMessage};

/// Four days.
pub const DEFAULT_INJUNCTION_WINDOW: Tick = 4 * SECONDS_PER_DAY;
pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_RETRY_INTERVAL: Tick = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnouncementConfig {
    pub injunction_window: Tick,
    pub max_retries: u32,
    pub retry_interval: Tick,
}

impl Default for AnnouncementConfig {
    fn default() -> Self {
        AnnouncementConfig {
            injunction_window: DEFAULT_INJUNCTION_WINDOW,
            max_retries: DEFAULT_MAX_RETRIES,
            retry_interval: DEFAULT_RETRY_INTERVAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnounceError {
    #[error("manifest is not compliant: {0}")]
    NotCompliant(String),
    #[error("delivery failed after {attempts} attempts and no public board was available")]
    DeliveryFailed { attempts: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum InjunctionError {
    #[error("injunction window closed at {window_ends}, filed at {now}")]
    WindowClosed { now: Tick, window_ends: Tick },
    #[error("announcement delivered at {delivered_at}, injunction filed earlier at {now}")]
    NotYetAnnounced { now: Tick, delivered_at: Tick },
}

/// Something an announcement can be delivered to.
pub trait DeliveryChannel {
    /// Attempts delivery at `now`; an acknowledgment on success.
    fn deliver(&mut self, manifest_digest: &Digest, now: Tick) -> Option<Digest>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reachability {
    Reachable,
    DropAll,
    /// Drop this many attempts, then accept.
    DropFirst(u32),
}

impl fmt::Display for Reachability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reachability::Reachable => f.write_str("reachable"),
            Reachability::DropAll => f.write_str("drop_all"),
            Reachability::DropFirst(n) => write!(f, "drop_first:{n}"),
        }
    }
}

impl std::str::FromStr for Reachability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reachable" => Ok(Reachability::Reachable),
            "drop_all" => Ok(Reachability::DropAll),
            _ => s
                .strip_prefix("drop_first:")
                .and_then(|n| n.parse().ok())
                .map(Reachability::DropFirst)
                .ok_or_else(|| format!("expected reachable, drop_all or drop_first:N, got `{s}`")),
        }
    }
}

/// Target endpoint that acknowledges with a keyed tag over
/// `(manifest digest, delivery tick)`.
#[derive(Debug, Clone)]
pub struct SimulatedTarget {
    key: [u8; 32],
    reachability: Reachability,
    attempts: u32,
}

impl SimulatedTarget {
    pub fn new(key: [u8; 32], reachability: Reachability) -> Self {
        SimulatedTarget {
            key,
            reachability,
            attempts: 0,
        }
    }

    pub fn ack_for(&self, manifest_digest: &Digest, at: Tick) -> Digest {
        hmac_sha256(&self.key, &[manifest_digest.as_bytes(), &at.to_be_bytes()])
    }

    pub fn attempts(&self) -> u32 {
        self.attempts
    }
}

impl DeliveryChannel for SimulatedTarget {
    fn deliver(&mut self, manifest_digest: &Digest, now: Tick) -> Option<Digest> {
        self.attempts += 1;
        let accept = match self.reachability {
            Reachability::Reachable => true,
            Reachability::DropAll => false,
            Reachability::DropFirst(n) => self.attempts > n,
        };
        accept.then(|| self.ack_for(manifest_digest, now))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeliveryProof {
    TargetAck(Digest),
    /// Posted to the public board at this entry index.
    Board {
        index: u64,
        entry_digest: Digest,
    },
}

impl DeliveryProof {
    pub fn label(&self) -> &'static str {
        match self {
            DeliveryProof::TargetAck(_) => "ack",
            DeliveryProof::Board { .. } => "board",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnouncementReceipt {
    pub manifest_digest: Digest,
    pub delivered_at: Tick,
    pub proof: DeliveryProof,
    pub window_ends: Tick,
    /// Delivery attempts made against the target.
    pub attempts: u32,
}

/// Body of the board notice used when the target cannot be reached.
pub fn board_announcement_body(manifest_digest: &Digest) -> String {
    format!("announcement {manifest_digest}")
}

/// Delivers the manifest to the target, retrying every `retry_interval`
/// up to `max_retries` times, then falls back to posting on the board.
pub fn announce<C: DeliveryChannel>(
    manifest: &AssemblyManifest,
    target: &mut C,
    now: Tick,
    config: &AnnouncementConfig,
    policy: &CompliancePolicy,
    board: Option<&mut Board>,
) -> Result<AnnouncementReceipt, AnnounceError> {
    let report = check_manifest_with(manifest, policy).map_err(|e| AnnounceError::NotCompliant(e.to_string()))?;
    if !report.is_compliant() {
        let failed: Vec<&str> = report.failures().map(|f| f.requirement.title()).collect();
        return Err(AnnounceError::NotCompliant(failed.join(", ")));
    }
    let digest = manifest.digest();
    let mut at = now;
    for attempt in 0..=config.max_retries {
        if attempt > 0 {
            at += config.retry_interval;
        }
        if let Some(ack) = target.deliver(&digest, at) {
            return Ok(AnnouncementReceipt {
                manifest_digest: digest,
                delivered_at: at,
                proof: DeliveryProof::TargetAck(ack),
                window_ends: at + config.injunction_window,
                attempts: attempt + 1,
            });
        }
    }
    let attempts = config.max_retries + 1;
    let board = board.ok_or(AnnounceError::DeliveryFailed { attempts })?;
    let organizer = manifest
        .organizer_pseudonyms
        .first()
        .copied()
        .unwrap_or(Pseudonym(Digest::ZERO));
    let notice = ProtestMessage {
        pseudonym: organizer,
        assembly_id: manifest.assembly_id,
        sequence_no: 0,
        opinion_digest: manifest.opinion_digest(),
        body: board_announcement_body(&digest),
        timestamp: at,
    };
    let entry = board
        .append(notice)
        .map_err(|_| AnnounceError::DeliveryFailed { attempts })?
        .entry()
        .clone();
    Ok(AnnouncementReceipt {
        manifest_digest: digest,
        delivered_at: at,
        proof: DeliveryProof::Board {
            index: entry.index,
            entry_digest: entry.entry_digest,
        },
        window_ends: at + config.injunction_window,
        attempts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjunctionDecision {
    Delay(Tick),
    Forbid,
    Allow,
}

impl fmt::Display for InjunctionDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InjunctionDecision::Delay(d) => write!(f, "delay:{d}"),
            InjunctionDecision::Forbid => f.write_str("forbid"),
            InjunctionDecision::Allow => f.write_str("allow"),
        }
    }
}

impl std::str::FromStr for InjunctionDecision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forbid" => Ok(InjunctionDecision::Forbid),
            "allow" => Ok(InjunctionDecision::Allow),
            _ => s
                .strip_prefix("delay:")
                .and_then(|d| d.parse().ok())
                .map(InjunctionDecision::Delay)
                .ok_or_else(|| format!("expected delay:N, forbid or allow, got `{s}`")),
        }
    }
}

/// Mutable schedule of an announced assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyStatus {
    pub start_time: Tick,
    pub end_time: Tick,
    pub forbidden: bool,
}

impl AssemblyStatus {
    pub fn from_manifest(m: &AssemblyManifest) -> Self {
        AssemblyStatus {
            start_time: m.start_time,
            end_time: m.end_time,
            forbidden: false,
        }
    }

    /// Applies a court decision filed at `now`, which must fall inside
    /// `[delivered_at, window_ends)`. A delay postpones the whole assembly,
    /// keeping its length.
    pub fn file_injunction(
        &mut self,
        receipt: &AnnouncementReceipt,
        decision: InjunctionDecision,
        now: Tick,
    ) -> Result<(), InjunctionError> {
        if now >= receipt.window_ends {
            return Err(InjunctionError::WindowClosed {
                now,
                window_ends: receipt.window_ends,
            });
        }
        if now < receipt.delivered_at {
            return Err(InjunctionError::NotYetAnnounced {
                now,
                delivered_at: receipt.delivered_at,
            });
        }
        match decision {
            InjunctionDecision::Delay(d) => {
                self.start_time += d;
                self.end_time += d;
            }
            InjunctionDecision::Forbid => self.forbidden = true,
            InjunctionDecision::Allow => {}
        }
        Ok(())
    }

    /// Earliest tick at which [`may_commence`] can hold.
    pub fn commencement(&self, receipt: &AnnouncementReceipt) -> Option<Tick> {
        let t = self.start_time.max(receipt.window_ends);
        (!self.forbidden && t < self.end_time).then_some(t)
    }
}

pub fn may_commence(status: &AssemblyStatus, receipt: Option<&AnnouncementReceipt>, now: Tick) -> bool {
    match receipt {
        Some(r) => now >= r.window_ends && now >= status.start_time && !status.forbidden && now < status.end_time,
        None => false,
    }
}
