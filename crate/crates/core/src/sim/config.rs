//! Scenario description and its `key = value` file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::assembly::{
    AnnouncementConfig, InjunctionDecision, Reachability, SizeClass, TargetDescriptor, DEFAULT_INJUNCTION_WINDOW,
    DEFAULT_MAX_RETRIES, DEFAULT_RETRY_INTERVAL,
};
use crate::gossip::NodeId;
use crate::kvfile::{parse_value, Document, ParseError, SectionReader};
use crate::throttle::{default_human_rate, DEFAULT_AMPLIFICATION_THRESHOLD, DEFAULT_BURST};
use crate::types::{Rate, Tick};

pub const DEFAULT_ABUSE_THRESHOLD: u32 = 3;
pub const DEFAULT_PROTEST_LENGTH: Tick = 120;
pub const DEFAULT_DRAIN: Tick = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RevocationInitiator {
    Participants,
    Supervisor,
}

impl fmt::Display for RevocationInitiator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RevocationInitiator::Participants => "participants",
            RevocationInitiator::Supervisor => "supervisor",
        })
    }
}

impl FromStr for RevocationInitiator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "participants" => Ok(RevocationInitiator::Participants),
            "supervisor" => Ok(RevocationInitiator::Supervisor),
            _ => Err(format!("expected participants or supervisor, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryKind {
    /// Holds one genuine credential, asks for more, and presents forgeries.
    Sybil { forged: u32, duplicate_attempts: u32 },
    /// Replays its one credential at `multiplier` times the allowed rate.
    Botnet { multiplier: u64 },
    /// Sends requests that would amplify the target's response.
    Amplifier { ratio: f64 },
    /// Sends traffic without the collective opinion; `shares_submitted`
    /// holders cooperate once a revocation case opens.
    Disruptor { shares_submitted: u16 },
}

impl AdversaryKind {
    pub fn role(&self) -> &'static str {
        match self {
            AdversaryKind::Sybil { .. } => "sybil",
            AdversaryKind::Botnet { .. } => "botnet",
            AdversaryKind::Amplifier { .. } => "amplifier",
            AdversaryKind::Disruptor { .. } => "disruptor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarySpec {
    pub name: String,
    pub kind: AdversaryKind,
    pub count: u32,
    /// Start relative to scheduled commencement; negative probes early.
    pub offset: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Complete,
    Ring,
    /// Each pair joined with this probability.
    Random(f64),
    /// As `Random`, redrawn until connected.
    Connected(f64),
    Edges(Vec<(NodeId, NodeId)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub duration: Tick,
    pub participants: u64,
    pub adversaries: Vec<AdversarySpec>,
    pub target: TargetDescriptor,
    pub queue_max: u64,
    pub reachability: Reachability,
    pub opinion: String,
    pub rate: Rate,
    pub burst: u64,
    pub r_human_max: Rate,
    pub amplification_threshold: f64,
    pub critical_mass_min: u64,
    pub revocation_threshold: (u16, u16),
    pub revocation_initiator: RevocationInitiator,
    pub abuse_threshold: u32,
    pub announcement: AnnouncementConfig,
    pub start_time: Tick,
    pub end_time: Tick,
    pub injunctions: Vec<(Tick, InjunctionDecision)>,
    pub attestations: bool,
    pub board_mirroring: bool,
    pub supervisor: bool,
    pub topology: TopologySpec,
    pub fanout: usize,
    pub payload_size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl ScenarioConfig {
    /// A compliant scenario with `participants` honest members and no
    /// adversaries.
    pub fn baseline(name: &str, seed: u64, participants: u64) -> Self {
        let start = DEFAULT_INJUNCTION_WINDOW;
        let end = start + DEFAULT_PROTEST_LENGTH;
        ScenarioConfig {
            name: name.to_string(),
            seed,
            duration: end + DEFAULT_DRAIN,
            participants,
            adversaries: Vec::new(),
            target: TargetDescriptor {
                address: "target.example".into(),
                declared_capacity: 100,
                is_general_interest: false,
                size_class: SizeClass::Medium,
            },
            queue_max: 500,
            reachability: Reachability::Reachable,
            opinion: "Reverse the decision".into(),
            rate: default_human_rate(),
            burst: DEFAULT_BURST,
            r_human_max: default_human_rate(),
            amplification_threshold: DEFAULT_AMPLIFICATION_THRESHOLD,
            critical_mass_min: 10,
            revocation_threshold: (3, 5),
            revocation_initiator: RevocationInitiator::Participants,
            abuse_threshold: DEFAULT_ABUSE_THRESHOLD,
            announcement: AnnouncementConfig::default(),
            start_time: start,
            end_time: end,
            injunctions: Vec::new(),
            attestations: true,
            board_mirroring: true,
            supervisor: true,
            topology: TopologySpec::Complete,
            fanout: 1,
            payload_size: 512,
        }
    }

    /// People holding a genuine credential.
    pub fn enrolled_count(&self) -> u64 {
        self.participants + self.adversaries.iter().map(|a| a.count as u64).sum::<u64>()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.duration == 0 {
            return bad("duration must be positive".into());
        }
        if self.queue_max == 0 {
            return bad("queue_max must be at least 1".into());
        }
        if self.target.declared_capacity == 0 {
            return bad("target capacity must be positive".into());
        }
        if self.burst == 0 {
            return bad("burst must be at least 1".into());
        }
        if self.start_time >= self.end_time {
            return bad(format!(
                "start_time {} must precede end_time {}",
                self.start_time, self.end_time
            ));
        }
        if self.payload_size == 0 {
            return bad("payload_size must be positive".into());
        }
        if self.fanout == 0 {
            return bad("fanout must be at least 1".into());
        }
        if self.amplification_threshold.is_nan() || self.amplification_threshold <= 0.0 {
            return bad("amplification_threshold must be positive".into());
        }
        let (k, n) = self.revocation_threshold;
        if k < 1 || k > n || n > crate::revocation::MAX_SHARES {
            return bad(format!("revocation threshold k={k}, n={n} needs 1 <= k <= n <= 256"));
        }
        if self.revocation_initiator == RevocationInitiator::Supervisor && !self.supervisor {
            return bad("revocation_initiator = supervisor needs a supervisor".into());
        }
        let people = self.enrolled_count();
        if people > 0 && (n as u64) > people - 1 {
            return bad(format!(
                "n={n} share holders needed but only {} other participants enroll",
                people - 1
            ));
        }
        for a in &self.adversaries {
            match a.kind {
                AdversaryKind::Disruptor { shares_submitted } if shares_submitted > n => {
                    return bad(format!(
                        "[adversary.{}] shares_submitted {shares_submitted} exceeds n={n}",
                        a.name
                    ));
                }
                AdversaryKind::Amplifier { ratio } if ratio.is_nan() || ratio <= 0.0 => {
                    return bad(format!("[adversary.{}] ratio must be positive", a.name));
                }
                AdversaryKind::Botnet { multiplier: 0 } => {
                    return bad(format!("[adversary.{}] multiplier must be at least 1", a.name));
                }
                _ => {}
            }
        }
        match &self.topology {
            TopologySpec::Random(p) | TopologySpec::Connected(p) if !(0.0..=1.0).contains(p) => {
                return bad(format!("edge probability {p} outside [0, 1]"));
            }
            TopologySpec::Connected(p) if *p <= 0.0 && people > 0 => {
                return bad("connected topology needs a positive edge probability".into());
            }
            TopologySpec::Edges(edges) => {
                if let Some((u, _)) = edges.iter().find(|(u, v)| u == v) {
                    return bad(format!("topology self-loop at node {u}"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Parses a scenario. `base_dir` resolves `topology = file:...` paths.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<ScenarioConfig, ScenarioError> {
        let doc = Document::parse(text)?;
        for s in &doc.sections {
            if let Some(name) = &s.name {
                if name != "target" && !name.starts_with("adversary.") {
                    return Err(ParseError::new(s.line, 2, format!("unknown section [{name}]")).into());
                }
            }
        }
        let mut r = doc.reader(None).expect("root section");
        let name = r.string_or("name", "scenario");
        let mut cfg = ScenarioConfig::baseline(&name, 0, 0);
        cfg.seed = r.parse_or("seed", 0)?;
        cfg.participants = r.parse("participants")?;
        cfg.opinion = r.string_or("opinion", &cfg.opinion);
        cfg.rate = r.parse_or("rate", cfg.rate)?;
        cfg.burst = r.parse_or("burst", cfg.burst)?;
        cfg.r_human_max = r.parse_or("r_human_max", cfg.r_human_max)?;
        cfg.amplification_threshold = r.parse_or("amplification_threshold", cfg.amplification_threshold)?;
        cfg.critical_mass_min = r.parse_or("critical_mass_min", cfg.critical_mass_min)?;
        let k = r.parse_or("revocation_k", cfg.revocation_threshold.0)?;
        let n = r.parse_or("revocation_n", cfg.revocation_threshold.1)?;
        cfg.revocation_threshold = (k, n);
        cfg.revocation_initiator = r.parse_or("revocation_initiator", cfg.revocation_initiator)?;
        cfg.abuse_threshold = r.parse_or("abuse_threshold", cfg.abuse_threshold)?;
        cfg.announcement = AnnouncementConfig {
            injunction_window: r.parse_or("injunction_window", DEFAULT_INJUNCTION_WINDOW)?,
            max_retries: r.parse_or("announce_retries", DEFAULT_MAX_RETRIES)?,
            retry_interval: r.parse_or("retry_interval", DEFAULT_RETRY_INTERVAL)?,
        };
        cfg.start_time = r.parse_or("start_time", cfg.announcement.injunction_window)?;
        cfg.end_time = r.parse_or("end_time", cfg.start_time + DEFAULT_PROTEST_LENGTH)?;
        cfg.duration = r.parse_or("duration", cfg.end_time + DEFAULT_DRAIN)?;
        cfg.injunctions = match r.entry("injunctions") {
            Some(e) => parse_injunctions(&e.value).map_err(|m| ParseError::new(e.line, e.value_column, m))?,
            None => Vec::new(),
        };
        cfg.attestations = r.parse_or("attestations", true)?;
        cfg.board_mirroring = r.parse_or("board_mirroring", true)?;
        cfg.supervisor = r.parse_or("supervisor", true)?;
        cfg.fanout = r.parse_or("fanout", 1)?;
        cfg.payload_size = r.parse_or("payload_size", cfg.payload_size)?;
        cfg.topology = match r.entry("topology") {
            Some(e) => parse_topology(&e.value, base_dir).map_err(|m| ParseError::new(e.line, e.value_column, m))?,
            None => TopologySpec::Complete,
        };
        r.finish()?;

        if let Some(mut t) = doc.reader(Some("target")) {
            cfg.target.address = t.string_or("address", &cfg.target.address);
            cfg.target.declared_capacity = t.parse_or("capacity", cfg.target.declared_capacity)?;
            cfg.target.is_general_interest = t.parse_or("general_interest", false)?;
            cfg.target.size_class = t.parse_or("size_class", cfg.target.size_class)?;
            cfg.queue_max = t.parse_or("queue_max", cfg.queue_max)?;
            cfg.reachability = t.parse_or("reachability", cfg.reachability)?;
            t.finish()?;
        }

        for section in doc.sections_with_prefix("adversary.") {
            let name = section.name.as_deref().unwrap()["adversary.".len()..].to_string();
            let mut a = SectionReader::new(section, doc.end_line);
            let kind_entry = a.require("kind")?;
            let kind = match kind_entry.value.as_str() {
                "sybil" => AdversaryKind::Sybil {
                    forged: a.parse_or("forged", 3)?,
                    duplicate_attempts: a.parse_or("duplicate_attempts", 1)?,
                },
                "botnet" => AdversaryKind::Botnet {
                    multiplier: a.parse_or("multiplier", 10)?,
                },
                "amplifier" => AdversaryKind::Amplifier {
                    ratio: a.parse_or("ratio", 8.5)?,
                },
                "disruptor" => AdversaryKind::Disruptor {
                    shares_submitted: a.parse_or("shares_submitted", k)?,
                },
                other => {
                    return Err(ParseError::new(
                        kind_entry.line,
                        kind_entry.value_column,
                        format!("unknown adversary kind `{other}`"),
                    )
                    .into())
                }
            };
            let count = a.parse_or("count", 1)?;
            let offset = match a.entry("offset") {
                Some(e) => parse_value::<i64>(e)?,
                None => 0,
            };
            a.finish()?;
            cfg.adversaries.push(AdversarySpec {
                name,
                kind,
                count,
                offset,
            });
        }
        Ok(cfg)
    }
}

fn parse_injunctions(value: &str) -> Result<Vec<(Tick, InjunctionDecision)>, String> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (t, d) = item
                .split_once(':')
                .ok_or_else(|| format!("expected `tick:decision`, got `{item}`"))?;
            let t: Tick = t.trim().parse().map_err(|_| format!("bad injunction tick `{t}`"))?;
            Ok((t, d.trim().parse()?))
        })
        .collect()
}

fn parse_topology(value: &str, base_dir: Option<&Path>) -> Result<TopologySpec, String> {
    let prob = |p: &str| p.parse::<f64>().map_err(|_| format!("bad edge probability `{p}`"));
    match value {
        "complete" => Ok(TopologySpec::Complete),
        "ring" => Ok(TopologySpec::Ring),
        _ => {
            if let Some(p) = value.strip_prefix("random:") {
                Ok(TopologySpec::Random(prob(p)?))
            } else if let Some(p) = value.strip_prefix("connected:") {
                Ok(TopologySpec::Connected(prob(p)?))
            } else if let Some(path) = value.strip_prefix("file:") {
                let full = match base_dir {
                    Some(dir) => dir.join(path),
                    None => Path::new(path).to_path_buf(),
                };
                let text = std::fs::read_to_string(&full).map_err(|e| format!("{}: {e}", full.display()))?;
                let topo = crate::gossip::Topology::parse_edge_list(&text, 0, 1).map_err(|e| e.to_string())?;
                let edges = (0..topo.node_count())
                    .flat_map(|u| topo.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
                    .collect();
                Ok(TopologySpec::Edges(edges))
            } else {
                Err(format!(
                    "expected complete, ring, random:P, connected:P or file:PATH, got `{value}`"
                ))
            }
        }
    }
}
