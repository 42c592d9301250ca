//! Admission control for protest traffic.
//!
//! Every credential owns a token bucket of capacity `b` refilled at `r`
//! tokens per second, and the group shares a bucket of capacity
//! `N_active * b` refilled at `N_active * r`. A request must find a token in
//! both. Tokens are counted in units of `1 / r.den()` so refill is exact for
//! any rational rate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::crypto::Digest;
use crate::types::{Pseudonym, Rate, Tick};

pub const DEFAULT_BURST: u64 = 5;
/// Requests whose response would exceed the request size are refused.
pub const DEFAULT_AMPLIFICATION_THRESHOLD: f64 = 1.0;

pub fn default_human_rate() -> Rate {
    Rate::per_second(1)
}

/// Per-credential limits shared by every participant of one assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrottleConfig {
    pub rate: Rate,
    pub burst: u64,
    pub amplification_threshold: f64,
}

impl Default for ThrottleConfig {
    fn default() -> Self {
        ThrottleConfig {
            rate: default_human_rate(),
            burst: DEFAULT_BURST,
            amplification_threshold: DEFAULT_AMPLIFICATION_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub pseudonym: Pseudonym,
    pub timestamp: Tick,
    pub payload_size: u64,
    /// Response bytes per request byte.
    pub expected_response_ratio: f64,
    pub opinion_digest: Digest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    RateExceeded,
    GroupCapExceeded,
    Amplification,
    MissingOpinion,
    MalformedRequest,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::RateExceeded => "rate_exceeded",
            RejectReason::GroupCapExceeded => "group_cap_exceeded",
            RejectReason::Amplification => "amplification",
            RejectReason::MissingOpinion => "missing_opinion",
            RejectReason::MalformedRequest => "malformed_request",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Admit,
    Reject(RejectReason),
}

/// Preconditions of [`RateState::admit`] that the caller failed to meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AdmitError {
    #[error("credential is not enrolled in this assembly")]
    UnknownCredential,
    #[error("credential has been revoked")]
    RevokedCredential,
    #[error("assembly may not commence at this time")]
    AssemblyInactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Bucket {
    /// Tokens scaled by the rate denominator.
    scaled: u128,
    last: Tick,
}

impl Bucket {
    fn full(capacity: u128, now: Tick) -> Self {
        Bucket {
            scaled: capacity,
            last: now,
        }
    }

    fn refill(&mut self, now: Tick, per_tick: u128, capacity: u128) {
        if now > self.last {
            let gained = per_tick.saturating_mul((now - self.last) as u128);
            self.scaled = self.scaled.saturating_add(gained).min(capacity);
            self.last = now;
        }
        self.scaled = self.scaled.min(capacity);
    }
}

/// Token buckets for one assembly.
#[derive(Debug, Clone)]
pub struct RateState {
    config: ThrottleConfig,
    opinion_digest: Digest,
    buckets: BTreeMap<Pseudonym, Bucket>,
    revoked: BTreeSet<Pseudonym>,
    n_active: u64,
    global: Bucket,
    last_update: Tick,
}

impl RateState {
    pub fn new(config: ThrottleConfig, opinion_digest: Digest) -> Self {
        RateState {
            config,
            opinion_digest,
            buckets: BTreeMap::new(),
            revoked: BTreeSet::new(),
            n_active: 0,
            global: Bucket { scaled: 0, last: 0 },
            last_update: 0,
        }
    }

    pub fn config(&self) -> &ThrottleConfig {
        &self.config
    }

    pub fn n_active(&self) -> u64 {
        self.n_active
    }

    pub fn last_update(&self) -> Tick {
        self.last_update
    }

    fn unit(&self) -> u128 {
        self.config.rate.den() as u128
    }

    fn credential_capacity(&self) -> u128 {
        self.config.burst as u128 * self.unit()
    }

    fn global_capacity(&self) -> u128 {
        self.n_active as u128 * self.credential_capacity()
    }

    fn global_refill(&self) -> u128 {
        self.n_active as u128 * self.config.rate.num() as u128
    }

    /// Group refill in requests per second.
    pub fn global_refill_rate(&self) -> (u128, u64) {
        (self.global_refill(), self.config.rate.den())
    }

    /// Whole tokens currently in the group bucket (after refilling to `now`).
    pub fn global_tokens(&mut self, now: Tick) -> u128 {
        self.settle_global(now);
        self.global.scaled / self.unit()
    }

    pub fn is_enrolled(&self, p: &Pseudonym) -> bool {
        self.buckets.contains_key(p)
    }

    pub fn is_revoked(&self, p: &Pseudonym) -> bool {
        self.revoked.contains(p)
    }

    fn settle_global(&mut self, now: Tick) {
        let (per_tick, cap) = (self.global_refill(), self.global_capacity());
        self.global.refill(now, per_tick, cap);
        self.last_update = self.last_update.max(now);
    }

    /// Rescales the group bucket to `n_active` members. Growth adds the new
    /// members' burst; shrinkage clamps. Per-credential buckets are untouched.
    pub fn set_enrollment(&mut self, n_active: u64, now: Tick) {
        self.settle_global(now);
        let old = self.n_active;
        self.n_active = n_active;
        if n_active > old {
            let extra = (n_active - old) as u128 * self.credential_capacity();
            self.global.scaled = self.global.scaled.saturating_add(extra);
        }
        self.global.scaled = self.global.scaled.min(self.global_capacity());
    }

    /// Registers a verified credential with a full bucket and grows the group.
    pub fn enroll(&mut self, p: Pseudonym, now: Tick) {
        if self.buckets.contains_key(&p) {
            return;
        }
        let cap = self.credential_capacity();
        self.buckets.insert(p, Bucket::full(cap, now));
        self.set_enrollment(self.n_active + 1, now);
    }

    /// Bars a credential from further admission and shrinks the group.
    pub fn revoke(&mut self, p: Pseudonym, now: Tick) {
        if self.buckets.contains_key(&p) && self.revoked.insert(p) {
            self.set_enrollment(self.n_active.saturating_sub(1), now);
        }
    }

    pub fn admit(&mut self, req: &Request, now: Tick, assembly_active: bool) -> Result<Decision, AdmitError> {
        if !self.buckets.contains_key(&req.pseudonym) {
            return Err(AdmitError::UnknownCredential);
        }
        if self.revoked.contains(&req.pseudonym) {
            return Err(AdmitError::RevokedCredential);
        }
        if !assembly_active {
            return Err(AdmitError::AssemblyInactive);
        }
        let ratio = req.expected_response_ratio;
        if req.payload_size == 0 || ratio.is_nan() || ratio <= 0.0 {
            return Ok(Decision::Reject(RejectReason::MalformedRequest));
        }
        if req.expected_response_ratio > self.config.amplification_threshold {
            return Ok(Decision::Reject(RejectReason::Amplification));
        }
        if req.opinion_digest != self.opinion_digest {
            return Ok(Decision::Reject(RejectReason::MissingOpinion));
        }

        let unit = self.unit();
        let (per_tick, cap) = (self.config.rate.num() as u128, self.credential_capacity());
        self.settle_global(now);
        let bucket = self.buckets.get_mut(&req.pseudonym).expect("checked above");
        bucket.refill(now, per_tick, cap);
        if bucket.scaled < unit {
            return Ok(Decision::Reject(RejectReason::RateExceeded));
        }
        if self.global.scaled < unit {
            return Ok(Decision::Reject(RejectReason::GroupCapExceeded));
        }
        bucket.scaled -= unit;
        self.global.scaled -= unit;
        Ok(Decision::Admit)
    }
}

/// Smallest group whose combined rate `N * r` reaches capacity `C`.
pub fn critical_mass(capacity: u64, rate: Rate) -> u64 {
    let need = capacity as u128 * rate.den() as u128;
    need.div_ceil(rate.num() as u128) as u64
}
