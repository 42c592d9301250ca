//! Assembly lifecycle: manifest, requirement check, announcement,
//! injunctions and the commencement gate.

mod announce;
mod compliance;
mod manifest;

pub use announce::{
    announce, board_announcement_body, may_commence, AnnounceError, AnnouncementConfig, AnnouncementReceipt,
    AssemblyStatus, DeliveryChannel, DeliveryProof, InjunctionDecision, InjunctionError, Reachability, SimulatedTarget,
    DEFAULT_INJUNCTION_WINDOW, DEFAULT_MAX_RETRIES, DEFAULT_RETRY_INTERVAL,
};
pub use compliance::{
    check_manifest, check_manifest_with, CompliancePolicy, ComplianceReport, Finding, MalformedManifest, Mechanism,
    Requirement, RequirementGroup, Verdict,
};
pub use manifest::{
    opinion_digest, AssemblyManifest, Attestation, AttestationSet, SizeClass, TargetDescriptor, MAX_OPINION_BYTES,
};
