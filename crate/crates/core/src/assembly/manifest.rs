use std::fmt;
use std::str::FromStr;

use crate::crypto::{sha256, Digest};
use crate::kvfile::{escape, Document, ParseError};
use crate::types::{AssemblyId, Pseudonym, Rate, Tick};

pub const MAX_OPINION_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeClass::Small => "small",
            SizeClass::Medium => "medium",
            SizeClass::Large => "large",
        })
    }
}

impl FromStr for SizeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small" => Ok(SizeClass::Small),
            "medium" => Ok(SizeClass::Medium),
            "large" => Ok(SizeClass::Large),
            _ => Err(format!("expected small, medium or large, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetDescriptor {
    pub address: String,
    /// Requests per second the target serves.
    pub declared_capacity: u64,
    /// Critical-infrastructure marker; such targets are never proportionate.
    pub is_general_interest: bool,
    pub size_class: SizeClass,
}

/// One signed-off justification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Attestation {
    pub text: String,
    pub author: Option<Pseudonym>,
    pub timestamp: Tick,
}

impl Attestation {
    pub fn new(text: impl Into<String>) -> Self {
        Attestation {
            text: text.into(),
            ..Default::default()
        }
    }

    pub fn is_present(&self) -> bool {
        !self.text.trim().is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttestationSet {
    /// Alternatives that were pursued first.
    pub subsidiarity: Attestation,
    /// Why the expected damage is balanced against the goal.
    pub proportionality: Attestation,
    pub no_coercion_declared: bool,
    pub no_coercion: Attestation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssemblyManifest {
    pub assembly_id: AssemblyId,
    pub target: TargetDescriptor,
    pub opinion_statement: String,
    pub start_time: Tick,
    pub end_time: Tick,
    pub rate: Rate,
    pub burst: u64,
    pub critical_mass_min: u64,
    pub revocation_threshold: (u16, u16),
    pub organizer_pseudonyms: Vec<Pseudonym>,
    /// Every protest message is mirrored to the public board.
    pub board_mirroring: bool,
    /// Where the supervising observer reads from; empty if none declared.
    pub supervisor_channel: String,
    pub attestations: AttestationSet,
}

/// Digest of an opinion statement, carried by every protest request.
pub fn opinion_digest(statement: &str) -> Digest {
    sha256(&[b"assemblynet/opinion", statement.as_bytes()])
}

impl AssemblyManifest {
    pub fn opinion_digest(&self) -> Digest {
        opinion_digest(&self.opinion_statement)
    }

    /// Digest of the canonical serialization.
    pub fn digest(&self) -> Digest {
        sha256(&[self.to_canonical_string().as_bytes()])
    }

    /// Structural problems that make the manifest unusable, as opposed to
    /// requirement failures the checker reports.
    pub fn structural_errors(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.start_time >= self.end_time {
            out.push(format!(
                "start_time {} is not before end_time {}",
                self.start_time, self.end_time
            ));
        }
        if self.opinion_statement.len() > MAX_OPINION_BYTES {
            out.push(format!(
                "opinion is {} bytes, over {MAX_OPINION_BYTES}",
                self.opinion_statement.len()
            ));
        }
        if self.burst == 0 {
            out.push("burst must be at least 1".into());
        }
        if self.target.declared_capacity == 0 {
            out.push("target capacity must be positive".into());
        }
        let (k, n) = self.revocation_threshold;
        if k < 1 || k > n || n > crate::revocation::MAX_SHARES {
            out.push(format!("revocation threshold k={k}, n={n} needs 1 <= k <= n <= 256"));
        }
        out
    }

    pub fn to_canonical_string(&self) -> String {
        let organizers: Vec<String> = self.organizer_pseudonyms.iter().map(|p| p.to_string()).collect();
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: &str| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&escape(v));
            s.push('\n');
        };
        kv(&mut s, "assembly_id", &self.assembly_id.to_string());
        kv(&mut s, "opinion", &self.opinion_statement);
        kv(&mut s, "start_time", &self.start_time.to_string());
        kv(&mut s, "end_time", &self.end_time.to_string());
        kv(&mut s, "rate", &self.rate.to_string());
        kv(&mut s, "burst", &self.burst.to_string());
        kv(&mut s, "critical_mass_min", &self.critical_mass_min.to_string());
        kv(&mut s, "revocation_k", &self.revocation_threshold.0.to_string());
        kv(&mut s, "revocation_n", &self.revocation_threshold.1.to_string());
        kv(&mut s, "organizers", &organizers.join(","));
        kv(&mut s, "board_mirroring", &self.board_mirroring.to_string());
        kv(&mut s, "supervisor_channel", &self.supervisor_channel);
        s.push_str("\n[target]\n");
        let t = &self.target;
        kv(&mut s, "address", &t.address);
        kv(&mut s, "capacity", &t.declared_capacity.to_string());
        kv(&mut s, "general_interest", &t.is_general_interest.to_string());
        kv(&mut s, "size_class", &t.size_class.to_string());
        s.push_str("\n[attestations]\n");
        let a = &self.attestations;
        for (name, att) in [
            ("subsidiarity", &a.subsidiarity),
            ("proportionality", &a.proportionality),
        ] {
            kv(&mut s, &format!("{name}.text"), &att.text);
            if let Some(p) = &att.author {
                kv(&mut s, &format!("{name}.author"), &p.to_string());
            }
            kv(&mut s, &format!("{name}.time"), &att.timestamp.to_string());
        }
        kv(&mut s, "no_coercion.declared", &a.no_coercion_declared.to_string());
        kv(&mut s, "no_coercion.text", &a.no_coercion.text);
        if let Some(p) = &a.no_coercion.author {
            kv(&mut s, "no_coercion.author", &p.to_string());
        }
        kv(&mut s, "no_coercion.time", &a.no_coercion.timestamp.to_string());
        s
    }

    pub fn parse(text: &str) -> Result<AssemblyManifest, ParseError> {
        let doc = Document::parse(text)?;
        for s in &doc.sections {
            if let Some(name) = &s.name {
                if name != "target" && name != "attestations" {
                    return Err(ParseError::new(s.line, 2, format!("unknown section [{name}]")));
                }
            }
        }

        let mut root = doc.reader(None).expect("root section");
        let assembly_id: AssemblyId = root.parse("assembly_id")?;
        let opinion_statement = root.string("opinion")?;
        let start_time: Tick = root.parse("start_time")?;
        let end_time: Tick = root.parse("end_time")?;
        let rate: Rate = root.parse("rate")?;
        let burst: u64 = root.parse("burst")?;
        let critical_mass_min: u64 = root.parse("critical_mass_min")?;
        let k: u16 = root.parse("revocation_k")?;
        let n: u16 = root.parse("revocation_n")?;
        let org_entry = root.require("organizers")?;
        let organizer_pseudonyms = org_entry
            .value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<Pseudonym>()
                    .map_err(|e| ParseError::new(org_entry.line, org_entry.value_column, format!("`organizers`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let board_mirroring: bool = root.parse("board_mirroring")?;
        let supervisor_channel = root.string("supervisor_channel")?;
        root.finish()?;

        let mut t = doc
            .reader(Some("target"))
            .ok_or_else(|| ParseError::new(doc.end_line, 1, "missing section [target]"))?;
        let target = TargetDescriptor {
            address: t.string("address")?,
            declared_capacity: t.parse("capacity")?,
            is_general_interest: t.parse("general_interest")?,
            size_class: t.parse("size_class")?,
        };
        t.finish()?;

        let mut a = doc
            .reader(Some("attestations"))
            .ok_or_else(|| ParseError::new(doc.end_line, 1, "missing section [attestations]"))?;
        let mut attestation = |name: &str| -> Result<Attestation, ParseError> {
            Ok(Attestation {
                text: a.string_or(&format!("{name}.text"), ""),
                author: a.optional(&format!("{name}.author"))?,
                timestamp: a.parse_or(&format!("{name}.time"), 0)?,
            })
        };
        let subsidiarity = attestation("subsidiarity")?;
        let proportionality = attestation("proportionality")?;
        let no_coercion = attestation("no_coercion")?;
        let no_coercion_declared = a.parse_or("no_coercion.declared", false)?;
        a.finish()?;

        Ok(AssemblyManifest {
            assembly_id,
            target,
            opinion_statement,
            start_time,
            end_time,
            rate,
            burst,
            critical_mass_min,
            revocation_threshold: (k, n),
            organizer_pseudonyms,
            board_mirroring,
            supervisor_channel,
            attestations: AttestationSet {
                subsidiarity,
                proportionality,
                no_coercion_declared,
                no_coercion,
            },
        })
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::compliant;
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let m = compliant();
        let text = m.to_canonical_string();
        let back = AssemblyManifest::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.digest(), m.digest());
    }

    #[test]
    fn multiline_opinion_survives() {
        let mut m = compliant();
        m.opinion_statement = "line one\nline two \\ slash".into();
        assert_eq!(AssemblyManifest::parse(&m.to_canonical_string()).unwrap(), m);
    }

    #[test]
    fn digest_changes_with_content() {
        let mut m = compliant();
        let d = m.digest();
        m.end_time += 1;
        assert_ne!(d, m.digest());
    }

    #[test]
    fn truncation_is_a_parse_error() {
        let text = compliant().to_canonical_string();
        let cut = &text[..text.find("[target]").unwrap() - 30];
        assert!(AssemblyManifest::parse(cut).is_err());
        let err = AssemblyManifest::parse("assembly_id = zz\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 15));
    }

    #[test]
    fn structural_errors_listed() {
        let mut m = compliant();
        assert!(m.structural_errors().is_empty());
        m.end_time = m.start_time;
        m.revocation_threshold = (4, 3);
        assert_eq!(m.structural_errors().len(), 2);
    }
}
