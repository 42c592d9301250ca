use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::{AdversaryKind, ScenarioConfig, ScenarioError, TopologySpec};
use super::event::{format_log, Event, EventKind};
use super::metrics::{first_window_violation, timeline_csv, Metrics, Revocation};
use super::target::{StepOutcome, TargetModel, TargetState};
use crate::assembly::{
    announce, check_manifest_with, may_commence, opinion_digest, AnnounceError, AnnouncementReceipt, AssemblyManifest,
    AssemblyStatus, Attestation, AttestationSet, CompliancePolicy, InjunctionDecision, InjunctionError,
    SimulatedTarget,
};
use crate::crypto::{sha256, Digest};
use crate::gossip::{GossipState, Item, ItemKind, NodeId, Topology, TopologyError};
use crate::identity::{Credential, Identity, IdentityError, IssuerState};
use crate::revocation::{CaseStatus, RevocationCase, RevocationEscrow, Share, SubmitOutcome};
use crate::throttle::{critical_mass, AdmitError, Decision, RateState, RejectReason, Request, ThrottleConfig};
use crate::types::{AssemblyId, Pseudonym, Tick};
use crate::visibility::{export_board, verify_chain, visibility_fraction, Board, BoardEntry, ProtestMessage};

/// Gossip gives up on a dissemination after this many rounds.
pub const MAX_GOSSIP_ROUNDS: u64 = 1000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub events: Vec<Event>,
    pub board: Vec<BoardEntry>,
    pub timeline: Vec<(Tick, StepOutcome)>,
    /// Runtime invariants that tripped; empty on a clean run.
    pub violations: Vec<String>,
}

impl RunOutput {
    pub fn event_log(&self) -> String {
        format_log(&self.events)
    }

    pub fn timeline_csv(&self) -> String {
        timeline_csv(&self.timeline)
    }

    pub fn board_export(&self) -> String {
        export_board(&self.board)
    }

    pub fn summary(&self, config: &ScenarioConfig) -> String {
        self.metrics.summary(&config.name, config.rate, &self.violations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Participant,
    Adversary(usize),
}

struct Person {
    node: NodeId,
    role: Role,
    identity: Identity,
    credential: Credential,
    forged: Vec<Credential>,
    /// First tick this person sends, if ever.
    start: Option<Tick>,
}

struct Escrowed {
    escrow: RevocationEscrow,
    /// `(person index, share)` in holder order.
    holders: Vec<(usize, Share)>,
    owner: usize,
}

/// One request as it leaves a sender.
struct Outgoing {
    person: usize,
    /// Index into the sender's forged credentials.
    forged: Option<usize>,
    ratio: f64,
    opinion: Digest,
}

fn role_name(cfg: &ScenarioConfig, role: Role) -> &'static str {
    match role {
        Role::Participant => "participant",
        Role::Adversary(i) => cfg.adversaries[i].kind.role(),
    }
}

fn build_manifest(cfg: &ScenarioConfig, assembly_id: AssemblyId, organizer: Pseudonym) -> AssemblyManifest {
    let signed = |text: &str| Attestation {
        text: text.into(),
        author: Some(organizer),
        timestamp: 0,
    };
    let attestations = if cfg.attestations {
        AttestationSet {
            subsidiarity: signed("conventional channels were tried first"),
            proportionality: signed("rate-capped, time-boxed, non-critical target"),
            no_coercion_declared: true,
            no_coercion: signed("no demand is enforced by the disruption"),
        }
    } else {
        AttestationSet::default()
    };
    AssemblyManifest {
        assembly_id,
        target: cfg.target.clone(),
        opinion_statement: cfg.opinion.clone(),
        start_time: cfg.start_time,
        end_time: cfg.end_time,
        rate: cfg.rate,
        burst: cfg.burst,
        critical_mass_min: cfg.critical_mass_min,
        revocation_threshold: cfg.revocation_threshold,
        organizer_pseudonyms: vec![organizer],
        board_mirroring: cfg.board_mirroring,
        supervisor_channel: if cfg.supervisor {
            "supervisor".into()
        } else {
            String::new()
        },
        attestations,
    }
}

fn build_topology(cfg: &ScenarioConfig, nodes: usize, rng: &mut ChaCha8Rng) -> Result<Topology, TopologyError> {
    Ok(match &cfg.topology {
        TopologySpec::Complete => Topology::complete(nodes, cfg.fanout),
        TopologySpec::Ring => Topology::ring(nodes, cfg.fanout),
        TopologySpec::Random(p) => Topology::random(nodes, *p, cfg.fanout, rng),
        TopologySpec::Connected(p) => Topology::random_connected(nodes, *p, cfg.fanout, rng),
        TopologySpec::Edges(edges) => Topology::from_edges(nodes, edges, cfg.fanout)?,
    })
}

/// Gossips `item` from node 0 until everyone reachable from it knows.
/// Returns the rounds taken, or `None` if the cap was hit.
fn disseminate(
    gossip: &mut GossipState,
    topology: &Topology,
    reachable: &[NodeId],
    item: Item,
    rng: &mut ChaCha8Rng,
    mut on_round: impl FnMut(u64, usize),
) -> Option<u64> {
    gossip.inject(0, item);
    let mut rounds = 0;
    while !gossip.converged_among(&item.digest, reachable) {
        if rounds == MAX_GOSSIP_ROUNDS {
            return None;
        }
        gossip.round(topology, rng);
        rounds += 1;
        on_round(rounds, gossip.nodes_knowing(&item.digest));
    }
    Some(rounds)
}

fn injunction_outcome(r: Result<(), InjunctionError>) -> &'static str {
    match r {
        Ok(()) => "applied",
        Err(InjunctionError::WindowClosed { .. }) => "window_closed",
        Err(InjunctionError::NotYetAnnounced { .. }) => "not_announced",
    }
}

/// Runs a scenario to completion. Deterministic in `config`.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput, SimError> {
    config.validate()?;
    let cfg = config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut events = Vec::new();
    let mut violations = Vec::new();
    let mut metrics = Metrics {
        seed: cfg.seed,
        participants: cfg.participants,
        n_crit: critical_mass(cfg.target.declared_capacity, cfg.rate),
        ..Metrics::default()
    };
    events.push(Event::new(
        0,
        EventKind::Scenario {
            seed: cfg.seed,
            participants: cfg.participants,
            duration: cfg.duration,
        },
    ));

    // Announcement and the injunction window.
    let assembly_id = AssemblyId::from_label(&cfg.name);
    let mut issuer = IssuerState::new(rng.gen());
    let mut delivery = SimulatedTarget::new(rng.gen(), cfg.reachability);
    let organizer = issuer.pseudonym_of(&Identity::new("organizer").expect("non-empty"), &assembly_id);
    let manifest = build_manifest(cfg, assembly_id, organizer);
    let opinion = manifest.opinion_digest();
    let policy = CompliancePolicy {
        r_human_max: cfg.r_human_max,
    };
    let mut board = Board::new(opinion);
    let mut early = Vec::new();
    let receipt: Option<AnnouncementReceipt> = match announce(
        &manifest,
        &mut delivery,
        0,
        &cfg.announcement,
        &policy,
        Some(&mut board),
    ) {
        Ok(r) => {
            for a in 0..r.attempts {
                let ok = a + 1 == r.attempts && r.proof.label() == "ack";
                early.push(Event::new(
                    a as Tick * cfg.announcement.retry_interval,
                    EventKind::AnnounceAttempt { attempt: a + 1, ok },
                ));
            }
            early.push(Event::new(
                r.delivered_at,
                EventKind::Announced {
                    proof: r.proof.label().into(),
                    delivered_at: r.delivered_at,
                    window_ends: r.window_ends,
                },
            ));
            Some(r)
        }
        Err(AnnounceError::NotCompliant(_)) => {
            let failed = check_manifest_with(&manifest, &policy)
                .map(|rep| rep.failures().count() as u32)
                .unwrap_or(0);
            early.push(Event::new(0, EventKind::NotCompliant { failed }));
            None
        }
        Err(AnnounceError::DeliveryFailed { attempts }) => {
            for a in 0..attempts {
                early.push(Event::new(
                    a as Tick * cfg.announcement.retry_interval,
                    EventKind::AnnounceAttempt {
                        attempt: a + 1,
                        ok: false,
                    },
                ));
            }
            early.push(Event::new(
                (attempts as Tick - 1) * cfg.announcement.retry_interval,
                EventKind::AnnounceFailed,
            ));
            None
        }
    };
    metrics.window_ends = receipt.as_ref().map(|r| r.window_ends);
    let enroll_at = match &receipt {
        Some(r) => r.window_ends,
        None => early.iter().map(|e: &Event| e.tick).fold(cfg.start_time, Tick::max),
    };

    let mut status = AssemblyStatus::from_manifest(&manifest);
    let mut injunctions: Vec<(Tick, InjunctionDecision)> = cfg.injunctions.clone();
    injunctions.sort_by_key(|&(t, _)| t);
    let mut late = Vec::new();
    for (t, decision) in injunctions {
        if t >= enroll_at {
            late.push((t, decision));
            continue;
        }
        let outcome = match &receipt {
            Some(r) => injunction_outcome(status.file_injunction(r, decision, t)),
            None => "not_announced",
        };
        early.push(Event::new(
            t,
            EventKind::Injunction {
                decision: decision.to_string(),
                outcome: outcome.into(),
            },
        ));
    }
    early.sort_by_key(|e| e.tick);
    events.append(&mut early);
    let commencement = receipt.as_ref().and_then(|r| status.commencement(r));
    metrics.commencement = commencement;
    events.push(Event::new(
        enroll_at,
        EventKind::Schedule {
            start: status.start_time,
            end: status.end_time,
            forbidden: status.forbidden,
        },
    ));

    // Enrollment: node 0 is the organizer, persons follow, the supervisor
    // observes from the last node.
    let throttle = ThrottleConfig {
        rate: cfg.rate,
        burst: cfg.burst,
        amplification_threshold: cfg.amplification_threshold,
    };
    let mut rate_state = RateState::new(throttle, opinion);
    let (k, n) = cfg.revocation_threshold;
    let mut roles = vec![Role::Participant; cfg.participants as usize];
    for (i, a) in cfg.adversaries.iter().enumerate() {
        roles.extend(std::iter::repeat_n(Role::Adversary(i), a.count as usize));
    }
    let people = roles.len();
    let mut persons: Vec<Person> = Vec::with_capacity(people);
    let mut escrows: BTreeMap<Pseudonym, Escrowed> = BTreeMap::new();
    let mut forged_set = BTreeSet::new();
    for (i, &role) in roles.iter().enumerate() {
        let identity = Identity::new(format!("person-{i}")).expect("short, non-empty");
        let issuance = match issuer.issue_credential(&identity, assembly_id, enroll_at, (k, n), &mut rng) {
            Ok(iss) => iss,
            Err(e) => {
                violations.push(format!("issuance for person {i} failed: {e}"));
                continue;
            }
        };
        let p = issuance.credential.pseudonym;
        let holders: Vec<(usize, Share)> = sample(&mut rng, people - 1, n as usize)
            .into_iter()
            .map(|h| if h >= i { h + 1 } else { h })
            .zip(issuance.shares)
            .collect();
        escrows.insert(
            p,
            Escrowed {
                escrow: issuance.escrow,
                holders,
                owner: i,
            },
        );
        rate_state.enroll(p, enroll_at);
        events.push(Event::new(
            enroll_at,
            EventKind::Enroll {
                pseudonym: p,
                role: role_name(cfg, role).into(),
            },
        ));
        let mut forged = Vec::new();
        if let Role::Adversary(a) = role {
            if let AdversaryKind::Sybil {
                forged: count,
                duplicate_attempts,
            } = cfg.adversaries[a].kind
            {
                for _ in 0..duplicate_attempts {
                    match issuer.issue_credential(&identity, assembly_id, enroll_at, (k, n), &mut rng) {
                        Err(IdentityError::DuplicateIssuance) => events.push(Event::new(
                            enroll_at,
                            EventKind::IssuanceRejected {
                                role: "sybil".into(),
                                reason: "duplicate_issuance".into(),
                            },
                        )),
                        other => violations.push(format!("second issuance to person {i} was not refused: {other:?}")),
                    }
                }
                let mut fake = IssuerState::random(&mut rng);
                for f in 0..count {
                    let id = Identity::new(format!("forged-{i}-{f}")).expect("short, non-empty");
                    let cred = fake
                        .issue_credential(&id, assembly_id, enroll_at, (k, n), &mut rng)
                        .expect("fresh forger identity")
                        .credential;
                    forged_set.insert(cred.pseudonym);
                    forged.push(cred);
                }
            }
        }
        persons.push(Person {
            node: i + 1,
            role,
            identity,
            credential: issuance.credential,
            forged,
            start: None,
        });
    }

    // Manifest dissemination.
    let node_count = people + 1 + cfg.supervisor as usize;
    let topology = build_topology(cfg, node_count, &mut rng)?;
    let mut gossip = GossipState::new(node_count);
    if cfg.supervisor {
        gossip.set_receive_only(node_count - 1);
    }
    let reachable = topology
        .partition_check()
        .into_iter()
        .find(|c| c.contains(&0))
        .expect("node 0 exists");
    let manifest_item = Item {
        kind: ItemKind::Manifest,
        digest: manifest.digest(),
    };
    let converged = disseminate(
        &mut gossip,
        &topology,
        &reachable,
        manifest_item,
        &mut rng,
        |round, knowing| {
            events.push(Event::new(
                enroll_at,
                EventKind::GossipRound {
                    item: "manifest".into(),
                    round,
                    knowing,
                },
            ))
        },
    );
    if let Some(round) = converged {
        events.push(Event::new(
            enroll_at,
            EventKind::GossipConverged {
                item: "manifest".into(),
                round,
            },
        ));
    }
    metrics.manifest_convergence = converged;

    // Who sends, and from when.
    let send_end = status.end_time;
    for p in &mut persons {
        p.start = match p.role {
            Role::Participant => commencement.filter(|_| gossip.knows(p.node, &manifest_item.digest)),
            Role::Adversary(a) => {
                let base = commencement.unwrap_or(status.start_time) as i128 + cfg.adversaries[a].offset as i128;
                Some(base.max(enroll_at as i128) as Tick)
            }
        }
        .filter(|&s| s < send_end);
    }
    let traffic_start = persons
        .iter()
        .filter_map(|p| p.start)
        .min()
        .filter(|&s| s < cfg.duration);

    // Main loop.
    let wrong_opinion = opinion_digest(&format!("not: {}", cfg.opinion));
    let mut target = TargetModel::new(cfg.target.declared_capacity, cfg.queue_max);
    let mut timeline = Vec::new();
    let mut verified: HashMap<Digest, bool> = HashMap::new();
    let mut abuse: BTreeMap<Pseudonym, u32> = BTreeMap::new();
    let mut cases: BTreeMap<Pseudonym, RevocationCase> = BTreeMap::new();
    let mut pending: Vec<(Tick, Pseudonym)> = Vec::new();
    let mut admitted_ticks: BTreeMap<Pseudonym, Vec<Tick>> = BTreeMap::new();
    let mut seq: BTreeMap<Pseudonym, u64> = BTreeMap::new();
    let mut delivered: Vec<ProtestMessage> = Vec::new();
    let mut late = late.into_iter().peekable();
    let mut last_state = TargetState::Up;
    let mut stopped_at = None;

    let mut t = enroll_at;
    while t < cfg.duration {
        while let Some(&(at, decision)) = late.peek() {
            if at > t {
                break;
            }
            late.next();
            let outcome = match &receipt {
                Some(r) => injunction_outcome(status.file_injunction(r, decision, at)),
                None => "not_announced",
            };
            if outcome == "applied" {
                violations.push(format!("injunction at {at} applied after enrollment"));
            }
            events.push(Event::new(
                at,
                EventKind::Injunction {
                    decision: decision.to_string(),
                    outcome: outcome.into(),
                },
            ));
        }

        let due: Vec<Pseudonym> = pending.iter().filter(|(at, _)| *at <= t).map(|&(_, p)| p).collect();
        pending.retain(|(at, _)| *at > t);
        for p in due {
            let e = &escrows[&p];
            let case = cases.get_mut(&p).expect("case opened before scheduling");
            let submitting = match persons[e.owner].role {
                Role::Adversary(a) => match cfg.adversaries[a].kind {
                    AdversaryKind::Disruptor { shares_submitted } => shares_submitted as usize,
                    _ => k as usize,
                },
                Role::Participant => k as usize,
            };
            for (_, share) in e.holders.iter().take(submitting) {
                match case.submit_share(share.clone(), &e.escrow) {
                    Ok(SubmitOutcome::Recorded { count }) | Ok(SubmitOutcome::Duplicate { count }) => {
                        events.push(Event::new(
                            t,
                            EventKind::ShareSubmitted {
                                pseudonym: p,
                                holder: share.holder_index,
                                count,
                            },
                        ))
                    }
                    Ok(SubmitOutcome::Revealed(identity)) => {
                        events.push(Event::new(
                            t,
                            EventKind::ShareSubmitted {
                                pseudonym: p,
                                holder: share.holder_index,
                                count: case.submitted_count(),
                            },
                        ));
                        let identity_digest = sha256(&[identity.as_bytes()]);
                        events.push(Event::new(
                            t,
                            EventKind::Revealed {
                                pseudonym: p,
                                identity_digest,
                            },
                        ));
                        metrics.revocations.push(Revocation {
                            pseudonym: p,
                            tick: t,
                            identity_digest,
                        });
                        if identity != persons[e.owner].identity {
                            violations.push(format!("revocation of {p} revealed the wrong identity"));
                        }
                        if cfg.supervisor {
                            events.push(Event::new(t, EventKind::SupervisorNotified { pseudonym: p }));
                        }
                        rate_state.revoke(p, t);
                        events.push(Event::new(
                            t,
                            EventKind::Barred {
                                pseudonym: p,
                                n_active: rate_state.n_active(),
                            },
                        ));
                        let notice = Item {
                            kind: ItemKind::RevocationNotice,
                            digest: sha256(&[b"assemblynet/revocation", p.as_bytes()]),
                        };
                        if let Some(round) =
                            disseminate(&mut gossip, &topology, &reachable, notice, &mut rng, |_, _| {})
                        {
                            events.push(Event::new(
                                t,
                                EventKind::GossipConverged {
                                    item: "revocation".into(),
                                    round,
                                },
                            ));
                        }
                        break;
                    }
                    Err(err) => violations.push(format!("share for {p} refused: {err}")),
                }
            }
        }

        if traffic_start.is_some_and(|s| t >= s) {
            if traffic_start == Some(t) {
                events.push(Event::new(t, EventKind::Observe));
                metrics.observed_from = Some(t);
            }
            let mut out = Vec::new();
            for (i, p) in persons.iter().enumerate() {
                let Some(start) = p.start.filter(|&s| s <= t && t < send_end) else {
                    continue;
                };
                let base = cfg.rate.events_by(t - start + 1) - cfg.rate.events_by(t - start);
                let mut push = |copies: u64, forged, ratio, opinion| {
                    for _ in 0..copies {
                        out.push(Outgoing {
                            person: i,
                            forged,
                            ratio,
                            opinion,
                        });
                    }
                };
                match p.role {
                    Role::Participant => push(base, None, 1.0, opinion),
                    Role::Adversary(a) => match cfg.adversaries[a].kind {
                        AdversaryKind::Sybil { .. } => {
                            push(base, None, 1.0, opinion);
                            for f in 0..p.forged.len() {
                                push(base, Some(f), 1.0, opinion);
                            }
                        }
                        AdversaryKind::Botnet { multiplier } => push(base * multiplier, None, 1.0, opinion),
                        AdversaryKind::Amplifier { ratio } => push(base, None, ratio, opinion),
                        AdversaryKind::Disruptor { .. } => push(base, None, 1.0, wrong_opinion),
                    },
                }
            }
            out.shuffle(&mut rng);

            let active = may_commence(&status, receipt.as_ref(), t);
            let mut arrivals = 0;
            for o in out {
                metrics.offered += 1;
                let person = &persons[o.person];
                let cred = match o.forged {
                    Some(f) => &person.forged[f],
                    None => &person.credential,
                };
                let p = cred.pseudonym;
                let genuine = *verified
                    .entry(cred.issuer_tag)
                    .or_insert_with(|| issuer.verify_credential(cred));
                let reason: &str = if !genuine {
                    "forged_credential"
                } else {
                    let req = Request {
                        pseudonym: p,
                        timestamp: t,
                        payload_size: cfg.payload_size,
                        expected_response_ratio: o.ratio,
                        opinion_digest: o.opinion,
                    };
                    match rate_state.admit(&req, t, active) {
                        Err(AdmitError::UnknownCredential) => "unknown_credential",
                        Err(AdmitError::RevokedCredential) => "revoked_credential",
                        Err(AdmitError::AssemblyInactive) => "assembly_inactive",
                        Ok(Decision::Reject(r)) => {
                            if r == RejectReason::MissingOpinion {
                                let count = abuse.entry(p).or_insert(0);
                                *count += 1;
                                if *count == cfg.abuse_threshold && !cases.contains_key(&p) && escrows.contains_key(&p)
                                {
                                    cases.insert(p, RevocationCase::open(p, t));
                                    pending.push((t + 1, p));
                                    events.push(Event::new(
                                        t,
                                        EventKind::CaseOpened {
                                            pseudonym: p,
                                            initiator: cfg.revocation_initiator.to_string(),
                                        },
                                    ));
                                }
                            }
                            r.as_str()
                        }
                        Ok(Decision::Admit) => {
                            if o.ratio > cfg.amplification_threshold {
                                violations.push(format!("{p} admitted at response ratio {}", o.ratio));
                            }
                            if forged_set.contains(&p) {
                                violations.push(format!("forged credential {p} admitted"));
                            }
                            if !active || receipt.as_ref().is_none_or(|r| t < r.window_ends) {
                                violations.push(format!("{p} admitted at {t} before commencement"));
                            }
                            let next = seq.entry(p).or_insert(0);
                            let msg = ProtestMessage {
                                pseudonym: p,
                                assembly_id,
                                sequence_no: *next,
                                opinion_digest: opinion,
                                body: cfg.opinion.clone(),
                                timestamp: t,
                            };
                            *next += 1;
                            // Mirror first; delivery only happens once the board holds the message.
                            match board.append(msg.clone()) {
                                Ok(appended) => {
                                    let index = appended.entry().index;
                                    events.push(Event::new(
                                        t,
                                        EventKind::Admit {
                                            pseudonym: p,
                                            seq: msg.sequence_no,
                                            board_index: index,
                                        },
                                    ));
                                    *metrics.admitted.entry(p).or_insert(0) += 1;
                                    metrics.first_admission.get_or_insert(t);
                                    admitted_ticks.entry(p).or_default().push(t);
                                    delivered.push(msg);
                                    arrivals += 1;
                                }
                                Err(e) => violations.push(format!("board refused message from {p}: {e}")),
                            }
                            continue;
                        }
                    }
                };
                *metrics.rejects.entry(reason.to_string()).or_insert(0) += 1;
                events.push(Event::new(
                    t,
                    EventKind::Reject {
                        pseudonym: p,
                        reason: reason.into(),
                    },
                ));
            }

            let step = target.step(arrivals);
            if step.served > cfg.target.declared_capacity || step.queue > cfg.queue_max {
                violations.push(format!("target exceeded its bounds at {t}: {step:?}"));
            }
            if step.state != last_state {
                events.push(Event::new(
                    t,
                    EventKind::Target {
                        state: step.state,
                        queue: step.queue,
                    },
                ));
                last_state = step.state;
            }
            if step.state == TargetState::Up {
                metrics.up_ticks += 1;
            }
            if step.state == TargetState::Down && metrics.first_down.is_none() {
                metrics.first_down = Some(t);
            }
            timeline.push((t, step));
        }

        let quiet = pending.is_empty() && late.peek().is_none();
        if quiet && traffic_start.is_some_and(|s| s <= t) && t + 1 >= send_end && target.is_idle() {
            stopped_at = Some(t + 1);
            break;
        }
        let mut next = t + 1;
        if pending.is_empty() && traffic_start.is_none_or(|s| next < s) {
            let wake = [traffic_start, late.peek().map(|&(at, _)| at)]
                .into_iter()
                .flatten()
                .min()
                .unwrap_or(cfg.duration);
            next = next.max(wake);
        }
        t = next;
    }

    if let Some(from) = traffic_start {
        metrics.observed_ticks = cfg.duration - from;
        if let Some(stop) = stopped_at {
            metrics.up_ticks += cfg.duration - stop;
        }
    }
    metrics.delivered = delivered.len() as u64;
    metrics.mirrored = delivered
        .iter()
        .filter(|m| board.get(&m.pseudonym, m.sequence_no).is_some_and(|e| e.message == **m))
        .count() as u64;
    events.push(Event::new(cfg.duration, EventKind::End));

    // Invariants over the whole run.
    for (p, ticks) in &admitted_ticks {
        if let Some((i, j)) = first_window_violation(ticks, cfg.rate, cfg.burst) {
            violations.push(format!(
                "{p} admitted {} times in [{}, {}], over b + r*T",
                j - i + 1,
                ticks[i],
                ticks[j]
            ));
        }
    }
    if receipt.is_some() && visibility_fraction(&delivered, board.entries()) != 1.0 {
        violations.push("delivered messages missing from the board".into());
    }
    if !verify_chain(board.entries()) {
        violations.push("board chain does not verify".into());
    }
    if metrics.offered != metrics.admitted_total() + metrics.rejected_total() {
        violations.push(format!(
            "offered {} != admitted {} + rejected {}",
            metrics.offered,
            metrics.admitted_total(),
            metrics.rejected_total()
        ));
    }
    for (p, case) in &cases {
        let revealed = matches!(case.status(), CaseStatus::Revealed(_));
        if revealed != (case.submitted_count() >= k as usize) {
            violations.push(format!(
                "case against {p}: {} shares submitted, revealed = {revealed}",
                case.submitted_count()
            ));
        }
    }

    Ok(RunOutput {
        metrics,
        events,
        board: board.entries().to_vec(),
        timeline,
        violations,
    })
}
