//! The nine-node requirement checker.
//!
//! Requirements fall into three groups (definition, permissibility, order).
//! Six are checked mechanically against the manifest. The other three are
//! judicial balancing questions; the checker only confirms that an
//! attestation was made and reports them as `Attested`, never `Pass`.

use std::fmt;

use thiserror::Error;

use super::manifest::AssemblyManifest;
use crate::types::Rate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RequirementGroup {
    Definition,
    Permissibility,
    Order,
}

impl RequirementGroup {
    pub fn title(&self) -> &'static str {
        match self {
            RequirementGroup::Definition => "definition",
            RequirementGroup::Permissibility => "permissibility",
            RequirementGroup::Order => "order",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Requirement {
    Visibility,
    ExpressionOfOpinion,
    Collectivity,
    NoCoercion,
    Proportionality,
    Subsidiarity,
    Supervision,
    CentralOrganisation,
    Announcement,
}

/// Protocol mechanisms that realize a requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mechanism {
    PublicBoard,
    OneManOneVote,
    GroupProportionality,
    RevocableAnonymity,
    Decentralised,
}

impl Mechanism {
    pub fn title(&self) -> &'static str {
        match self {
            Mechanism::PublicBoard => "visibility",
            Mechanism::OneManOneVote => "one man one vote",
            Mechanism::GroupProportionality => "group proportionality",
            Mechanism::RevocableAnonymity => "revocable anonymity",
            Mechanism::Decentralised => "decentralised",
        }
    }
}

impl Requirement {
    pub const ALL: [Requirement; 9] = [
        Requirement::Visibility,
        Requirement::ExpressionOfOpinion,
        Requirement::Collectivity,
        Requirement::NoCoercion,
        Requirement::Proportionality,
        Requirement::Subsidiarity,
        Requirement::Supervision,
        Requirement::CentralOrganisation,
        Requirement::Announcement,
    ];

    pub fn title(&self) -> &'static str {
        match self {
            Requirement::Visibility => "visibility",
            Requirement::ExpressionOfOpinion => "expression of opinion",
            Requirement::Collectivity => "collectivity",
            Requirement::NoCoercion => "no coercion",
            Requirement::Proportionality => "proportionality",
            Requirement::Subsidiarity => "subsidiarity",
            Requirement::Supervision => "supervision",
            Requirement::CentralOrganisation => "central organisation",
            Requirement::Announcement => "announcement",
        }
    }

    pub fn group(&self) -> RequirementGroup {
        use Requirement::*;
        match self {
            Visibility | ExpressionOfOpinion | Collectivity => RequirementGroup::Definition,
            NoCoercion | Proportionality | Subsidiarity => RequirementGroup::Permissibility,
            Supervision | CentralOrganisation | Announcement => RequirementGroup::Order,
        }
    }

    /// Legal conditions the requirement derives from.
    pub fn derived_from(&self) -> &'static str {
        use Requirement::*;
        match self {
            Visibility | ExpressionOfOpinion | Collectivity => {
                "a group of people that publicly expresses their opinion"
            }
            NoCoercion => "the protest is in the general interest",
            Proportionality => "possible damages are proportional",
            Subsidiarity => "alternatives have been pursued",
            Supervision => "police supervises",
            CentralOrganisation | Announcement => "central organisation that announces",
        }
    }

    pub fn mechanisms(&self) -> &'static [Mechanism] {
        match self {
            Requirement::Visibility => &[Mechanism::PublicBoard],
            Requirement::Collectivity => &[Mechanism::OneManOneVote, Mechanism::GroupProportionality],
            Requirement::Supervision => &[Mechanism::RevocableAnonymity],
            Requirement::CentralOrganisation => &[Mechanism::Decentralised],
            _ => &[],
        }
    }

    /// Attestation-only nodes can never `Pass`.
    pub fn is_attestation_only(&self) -> bool {
        matches!(
            self,
            Requirement::NoCoercion | Requirement::Proportionality | Requirement::Subsidiarity
        )
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    Fail,
    Attested,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Attested => "ATTESTED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub requirement: Requirement,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplianceReport {
    findings: Vec<Finding>,
}

impl ComplianceReport {
    /// One finding per requirement, in [`Requirement::ALL`] order.
    pub fn findings(&self) -> &[Finding] {
        &self.findings
    }

    pub fn verdict(&self, r: Requirement) -> Verdict {
        self.findings
            .iter()
            .find(|f| f.requirement == r)
            .map(|f| f.verdict)
            .expect("every requirement has a finding")
    }

    pub fn is_compliant(&self) -> bool {
        self.findings.iter().all(|f| f.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.verdict == Verdict::Fail)
    }
}

impl fmt::Display for ComplianceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut group = None;
        for finding in &self.findings {
            let g = finding.requirement.group();
            if group != Some(g) {
                writeln!(f, "[{}]", g.title())?;
                group = Some(g);
            }
            writeln!(f, "{}: {} ({})", finding.requirement, finding.verdict, finding.detail)?;
        }
        write!(
            f,
            "overall: {}",
            if self.is_compliant() {
                "COMPLIANT"
            } else {
                "NON-COMPLIANT"
            }
        )
    }
}

/// Checker thresholds that are policy rather than manifest content.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompliancePolicy {
    /// Fastest per-person rate still considered human participation.
    pub r_human_max: Rate,
}

impl Default for CompliancePolicy {
    fn default() -> Self {
        CompliancePolicy {
            r_human_max: crate::throttle::default_human_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed manifest: {}", .0.join("; "))]
pub struct MalformedManifest(pub Vec<String>);

pub fn check_manifest(manifest: &AssemblyManifest) -> Result<ComplianceReport, MalformedManifest> {
    check_manifest_with(manifest, &CompliancePolicy::default())
}

fn mechanical(ok: bool, pass: &str, fail: &str) -> (Verdict, String) {
    if ok {
        (Verdict::Pass, pass.to_string())
    } else {
        (Verdict::Fail, fail.to_string())
    }
}

fn attested(ok: bool, pass: &str, fail: &str) -> (Verdict, String) {
    if ok {
        (Verdict::Attested, pass.to_string())
    } else {
        (Verdict::Fail, fail.to_string())
    }
}

pub fn check_manifest_with(
    manifest: &AssemblyManifest,
    policy: &CompliancePolicy,
) -> Result<ComplianceReport, MalformedManifest> {
    let problems = manifest.structural_errors();
    if !problems.is_empty() {
        return Err(MalformedManifest(problems));
    }
    let has_opinion = !manifest.opinion_statement.trim().is_empty();
    let att = &manifest.attestations;

    let findings = Requirement::ALL
        .iter()
        .map(|&r| {
            let (verdict, detail) = match r {
                Requirement::Visibility => mechanical(
                    manifest.board_mirroring && has_opinion,
                    "opinion mirrored to the public board",
                    if manifest.board_mirroring {
                        "no opinion to show"
                    } else {
                        "board mirroring disabled"
                    },
                ),
                Requirement::ExpressionOfOpinion => {
                    mechanical(has_opinion, "opinion statement present", "opinion statement empty")
                }
                Requirement::Collectivity => {
                    let group_ok = manifest.critical_mass_min >= 2;
                    let rate_ok = manifest.rate <= policy.r_human_max;
                    let fail = match (group_ok, rate_ok) {
                        (false, _) => format!("critical mass {} is below 2", manifest.critical_mass_min),
                        (_, false) => format!("rate {} exceeds human maximum {}", manifest.rate, policy.r_human_max),
                        _ => String::new(),
                    };
                    mechanical(group_ok && rate_ok, "group of at least two at a human rate", &fail)
                }
                Requirement::NoCoercion => attested(
                    att.no_coercion_declared && att.no_coercion.is_present(),
                    "declared and justified",
                    "no declaration of non-coercion",
                ),
                Requirement::Proportionality => {
                    if manifest.target.is_general_interest {
                        (Verdict::Fail, "target is critical infrastructure".to_string())
                    } else {
                        attested(
                            att.proportionality.is_present(),
                            "balance of interests attested",
                            "no proportionality justification",
                        )
                    }
                }
                Requirement::Subsidiarity => attested(
                    att.subsidiarity.is_present(),
                    "alternatives pursued",
                    "no account of alternatives pursued",
                ),
                Requirement::Supervision => mechanical(
                    !manifest.supervisor_channel.trim().is_empty(),
                    "supervisor observation channel declared",
                    "no supervisor observation channel",
                ),
                Requirement::CentralOrganisation => mechanical(
                    !manifest.organizer_pseudonyms.is_empty(),
                    "organizer registered",
                    "no organizer",
                ),
                Requirement::Announcement => mechanical(
                    !manifest.target.address.trim().is_empty(),
                    "target address available for delivery",
                    "no target address to announce to",
                ),
            };
            Finding {
                requirement: r,
                verdict,
                detail,
            }
        })
        .collect();
    Ok(ComplianceReport { findings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::manifest::fixtures::compliant;

    #[test]
    fn fully_populated_manifest_is_compliant() {
        let report = check_manifest(&compliant()).unwrap();
        assert_eq!(report.findings().len(), 9);
        assert!(report.is_compliant());
        for f in report.findings() {
            let expected = if f.requirement.is_attestation_only() {
                Verdict::Attested
            } else {
                Verdict::Pass
            };
            assert_eq!(f.verdict, expected, "{}", f.requirement);
        }
    }

    #[test]
    fn empty_opinion_fails_two_nodes() {
        let mut m = compliant();
        m.opinion_statement.clear();
        let report = check_manifest(&m).unwrap();
        assert_eq!(report.verdict(Requirement::ExpressionOfOpinion), Verdict::Fail);
        assert_eq!(report.verdict(Requirement::Visibility), Verdict::Fail);
        assert_eq!(report.failures().count(), 2);
        assert!(!report.is_compliant());
    }

    #[test]
    fn critical_infrastructure_is_never_proportionate() {
        let mut m = compliant();
        m.target.is_general_interest = true;
        let report = check_manifest(&m).unwrap();
        assert_eq!(report.verdict(Requirement::Proportionality), Verdict::Fail);
        assert!(m.attestations.proportionality.is_present());
    }

    #[test]
    fn collectivity_needs_group_and_human_rate() {
        let mut m = compliant();
        m.critical_mass_min = 1;
        assert_eq!(
            check_manifest(&m).unwrap().verdict(Requirement::Collectivity),
            Verdict::Fail
        );
        let mut m = compliant();
        m.rate = Rate::per_second(2);
        assert_eq!(
            check_manifest(&m).unwrap().verdict(Requirement::Collectivity),
            Verdict::Fail
        );
        let relaxed = CompliancePolicy {
            r_human_max: Rate::per_second(2),
        };
        assert_eq!(
            check_manifest_with(&m, &relaxed)
                .unwrap()
                .verdict(Requirement::Collectivity),
            Verdict::Pass
        );
    }

    #[test]
    fn missing_attestations_fail() {
        let mut m = compliant();
        m.attestations = Default::default();
        let report = check_manifest(&m).unwrap();
        for r in [
            Requirement::NoCoercion,
            Requirement::Proportionality,
            Requirement::Subsidiarity,
        ] {
            assert_eq!(report.verdict(r), Verdict::Fail);
        }
        let mut m = compliant();
        m.attestations.no_coercion_declared = false;
        assert_eq!(
            check_manifest(&m).unwrap().verdict(Requirement::NoCoercion),
            Verdict::Fail
        );
    }

    #[test]
    fn order_requirements() {
        let mut m = compliant();
        m.supervisor_channel.clear();
        m.organizer_pseudonyms.clear();
        m.target.address.clear();
        let report = check_manifest(&m).unwrap();
        for r in [
            Requirement::Supervision,
            Requirement::CentralOrganisation,
            Requirement::Announcement,
        ] {
            assert_eq!(report.verdict(r), Verdict::Fail);
        }
    }

    #[test]
    fn malformed_manifest_is_an_error() {
        let mut m = compliant();
        m.start_time = m.end_time;
        assert!(check_manifest(&m).is_err());
    }

    #[test]
    fn requirement_graph_shape() {
        let per_group = |g| Requirement::ALL.iter().filter(|r| r.group() == g).count();
        assert_eq!(per_group(RequirementGroup::Definition), 3);
        assert_eq!(per_group(RequirementGroup::Permissibility), 3);
        assert_eq!(per_group(RequirementGroup::Order), 3);
        assert_eq!(
            Requirement::Collectivity.mechanisms(),
            &[Mechanism::OneManOneVote, Mechanism::GroupProportionality]
        );
    }
}
