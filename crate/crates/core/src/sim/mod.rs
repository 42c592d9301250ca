//! Deterministic discrete-event simulation of an assembly against a
//! capacity-limited target, with adversaries, and the trace audit.
//!
//! One tick is one second. All randomness comes from a single ChaCha
//! generator seeded by the scenario, so a scenario and seed fix the event
//! log byte for byte.

mod audit;
mod config;
mod event;
mod metrics;
mod run;
mod target;

pub use audit::{replay_audit, AuditMismatch, AuditReport, Trace};
pub use config::{
    AdversaryKind, AdversarySpec, RevocationInitiator, ScenarioConfig, ScenarioError, TopologySpec,
    DEFAULT_ABUSE_THRESHOLD, DEFAULT_DRAIN, DEFAULT_PROTEST_LENGTH,
};
pub use event::{format_log, parse_log, Event, EventKind};
pub use metrics::{first_window_violation, timeline_csv, window_bound_holds, Metrics, Revocation};
pub use run::{run, RunOutput, SimError, MAX_GOSSIP_ROUNDS};
pub use target::{StepOutcome, TargetModel, TargetState};
