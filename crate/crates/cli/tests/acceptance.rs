//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Tolerances are the constants below.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use assemblynet::assembly::InjunctionDecision;
use assemblynet::crypto::sha256;
use assemblynet::gossip::{GossipState, Item, ItemKind, Topology};
use assemblynet::revocation::{reconstruct, secrecy_check, split_secret, Share};
use assemblynet::sim::{
    self, parse_log, replay_audit, AdversaryKind, AdversarySpec, EventKind, RunOutput, ScenarioConfig, TargetState,
    Trace,
};
use assemblynet::throttle::{Decision, RateState, RejectReason, Request, ThrottleConfig};
use assemblynet::visibility::{export_board, verify_chain};
use assemblynet::{Pseudonym, Rate, Tick};
use assemblynet_cli::board_verify_text;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OMOV_SCENARIOS: u64 = 100;
const OMOV_MAX_N: u64 = 256;
const OMOV_TIME_LIMIT: Duration = Duration::from_secs(60);
const DOWN_TOLERANCE_TICKS: i64 = 1;
const AMPLIFICATION_ATTEMPTS: usize = 1000;
const BOUNDARY_EPSILON: f64 = 1e-9;
const SHARING_INSTANCES: usize = 200;
const SHARING_TIME_LIMIT: Duration = Duration::from_secs(30);
const FUZZ_BOARD_ENTRIES: usize = 100;
const GOSSIP_SEEDS: u64 = 100;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(cfg: &ScenarioConfig) -> Result<RunOutput, String> {
    sim::run(cfg).map_err(|e| format!("{}: {e}", cfg.name))
}

/// Admission ticks per pseudonym, read back from the textual event log.
fn admissions_from_log(out: &RunOutput) -> Result<BTreeMap<Pseudonym, Vec<Tick>>, String> {
    let events = parse_log(&out.event_log()).map_err(|(l, e)| format!("log line {l}: {e}"))?;
    let mut map: BTreeMap<Pseudonym, Vec<Tick>> = BTreeMap::new();
    for e in events {
        if let EventKind::Admit { pseudonym, .. } = e.kind {
            map.entry(pseudonym).or_default().push(e.tick);
        }
    }
    Ok(map)
}

/// All-pairs check of `count <= b + r*T` over every window of admissions.
fn windows_within_bound(ticks: &[Tick], rate: Rate, burst: u64) -> bool {
    let (num, den) = (rate.num() as u128, rate.den() as u128);
    for i in 0..ticks.len() {
        for j in i..ticks.len() {
            let count = (j - i + 1) as u128;
            if count * den > burst as u128 * den + num * (ticks[j] - ticks[i]) as u128 {
                return false;
            }
        }
    }
    true
}

fn adversary(name: &str, kind: AdversaryKind, count: u32, offset: i64) -> AdversarySpec {
    AdversarySpec {
        name: name.into(),
        kind,
        count,
        offset,
    }
}

fn random_scenario(i: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11_0000 + i);
    let total = rng.gen_range(8..=OMOV_MAX_N);
    let mut cfg = ScenarioConfig::baseline(&format!("omov-{i}"), i, 0);
    cfg.rate = *[Rate::per_second(1), Rate::new(1, 2).unwrap(), Rate::per_second(2)]
        .choose(&mut rng)
        .unwrap();
    cfg.r_human_max = cfg.rate;
    cfg.burst = rng.gen_range(1..=5);
    cfg.target.declared_capacity = rng.gen_range(20..=300);
    let k = rng.gen_range(1..=4);
    cfg.revocation_threshold = (k, k + rng.gen_range(0..=2));
    let mut left = total;
    let mut take = |rng: &mut ChaCha8Rng, max: u64| {
        let c = rng.gen_range(0..=max.min(left.saturating_sub(4)));
        left -= c;
        c as u32
    };
    let sybils = take(&mut rng, 3);
    let bots = take(&mut rng, 6);
    let amps = take(&mut rng, 3);
    let trolls = take(&mut rng, 3);
    cfg.adversaries = vec![
        adversary(
            "s",
            AdversaryKind::Sybil {
                forged: 3,
                duplicate_attempts: 1,
            },
            sybils,
            rng.gen_range(-20..20),
        ),
        adversary(
            "b",
            AdversaryKind::Botnet {
                multiplier: rng.gen_range(2..12),
            },
            bots,
            rng.gen_range(-20..20),
        ),
        adversary("a", AdversaryKind::Amplifier { ratio: 8.5 }, amps, 0),
        adversary("d", AdversaryKind::Disruptor { shares_submitted: k }, trolls, 0),
    ];
    cfg.participants = left;
    cfg
}

/// Each pseudonym, in every window of T seconds, gets at most b + r*T.
fn one_man_one_vote() -> Outcome {
    let started = Instant::now();
    let mut checked = 0usize;
    let mut largest = 0;
    for i in 0..OMOV_SCENARIOS {
        let cfg = random_scenario(i);
        largest = largest.max(cfg.enrolled_count());
        let out = run(&cfg)?;
        for (p, ticks) in admissions_from_log(&out)? {
            ensure(windows_within_bound(&ticks, cfg.rate, cfg.burst), || {
                format!("{}: {p} over b + r*T", cfg.name)
            })?;
            checked += 1;
        }
        ensure(out.violations.is_empty(), || {
            format!("{}: {:?}", cfg.name, out.violations)
        })?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < OMOV_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{OMOV_SCENARIOS} scenarios up to N={largest}, {checked} pseudonyms within b + r*T, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn sit_in(participants: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::baseline("critical-mass", 1, participants);
    cfg.target.declared_capacity = 50;
    cfg.rate = Rate::per_second(1);
    cfg.burst = 1;
    cfg.queue_max = 500;
    cfg
}

fn critical_mass() -> Outcome {
    let below = run(&sit_in(49))?;
    ensure(below.metrics.availability() == 1.0, || {
        format!("N=49 availability {}", below.metrics.availability())
    })?;
    let over = run(&sit_in(100))?;
    // Queue fills at N*r - C per tick.
    let analytic = 500 / (100 - 50);
    let start = over.metrics.observed_from.ok_or("no traffic")?;
    let down = over
        .timeline
        .iter()
        .find(|(_, s)| s.state == TargetState::Down)
        .map(|(t, _)| t + 1 - start)
        .ok_or("N=100 never went down")?;
    ensure((down as i64 - analytic).abs() <= DOWN_TOLERANCE_TICKS, || {
        format!("down after {down}s, analytic {analytic}s")
    })?;
    ensure(over.metrics.time_to_down() == Some(down), || {
        "metrics disagree with timeline".into()
    })?;
    Ok(format!(
        "N=49 availability 1.0; N=100 down after {down}s (analytic {analytic}s, tolerance {DOWN_TOLERANCE_TICKS})"
    ))
}

fn amplification() -> Outcome {
    let opinion = sha256(&[b"opinion"]);
    let p = Pseudonym(sha256(&[b"amp"]));
    let mut state = RateState::new(
        ThrottleConfig {
            rate: Rate::per_second(1),
            burst: 1,
            amplification_threshold: 1.0,
        },
        opinion,
    );
    state.enroll(p, 0);
    let mut decide = |ratio: f64, t: Tick| {
        let req = Request {
            pseudonym: p,
            timestamp: t,
            payload_size: 64,
            expected_response_ratio: ratio,
            opinion_digest: opinion,
        };
        state.admit(&req, t, true).expect("enrolled and active")
    };
    let amplified = Decision::Reject(RejectReason::Amplification);
    for t in 0..AMPLIFICATION_ATTEMPTS as Tick {
        ensure(decide(8.5, t) == amplified, || format!("8.5 not rejected at {t}"))?;
        ensure(decide(1.0, t) != amplified, || format!("1.0 rejected at {t}"))?;
    }
    let t = AMPLIFICATION_ATTEMPTS as Tick + 10;
    ensure(decide(1.0 + BOUNDARY_EPSILON, t) == amplified, || {
        "1 + eps admitted".into()
    })?;
    ensure(decide(1.0 - BOUNDARY_EPSILON, t) != amplified, || {
        "1 - eps rejected".into()
    })?;

    let mut cfg = ScenarioConfig::baseline("amplifier", 9, 10);
    cfg.adversaries = vec![adversary("a", AdversaryKind::Amplifier { ratio: 8.5 }, 3, 0)];
    let out = run(&cfg)?;
    let events = parse_log(&out.event_log()).map_err(|(l, e)| format!("line {l}: {e}"))?;
    let amplifiers: BTreeSet<Pseudonym> = events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Enroll { pseudonym, role } if role == "amplifier" => Some(*pseudonym),
            _ => None,
        })
        .collect();
    let rejected = out.metrics.rejects.get("amplification").copied().unwrap_or(0);
    let leaked: u64 = amplifiers.iter().filter_map(|p| out.metrics.admitted.get(p)).sum();
    ensure(amplifiers.len() == 3 && rejected > 0 && leaked == 0, || {
        format!("in simulation: {rejected} amplification rejects, {leaked} amplifier admissions")
    })?;
    Ok(format!(
        "8.5 rejected {AMPLIFICATION_ATTEMPTS}/{AMPLIFICATION_ATTEMPTS}, 1.0 never, boundary 1 +/- {BOUNDARY_EPSILON:e}; {rejected} simulated amplifier requests all rejected"
    ))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n < k {
        return Vec::new();
    }
    let mut with = subsets(n - 1, k - 1);
    for s in &mut with {
        s.push(n - 1);
    }
    with.extend(subsets(n - 1, k));
    with
}

fn threshold_sharing() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ec2e7);
    let (mut full, mut partial) = (0usize, 0usize);
    for _ in 0..SHARING_INSTANCES {
        let len = rng.gen_range(1..=32);
        let secret: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let k: u16 = rng.gen_range(1..=5);
        let n: u16 = rng.gen_range(k..=8);
        let shares = split_secret(&secret, k, n, &mut rng).map_err(|e| e.to_string())?;
        for idx in subsets(n as usize, k as usize) {
            let pick: Vec<Share> = idx.iter().map(|&i| shares[i].clone()).collect();
            ensure(reconstruct(&pick, k).as_deref() == Ok(&secret[..]), || {
                format!("k={k} n={n} subset {idx:?} did not reconstruct")
            })?;
            full += 1;
        }
        for idx in subsets(n as usize, k as usize - 1) {
            let pick: Vec<Share> = idx.iter().map(|&i| shares[i].clone()).collect();
            ensure(secrecy_check(&pick, k).leaks_nothing(), || {
                format!("k={k} n={n} subset {idx:?} narrows the secret")
            })?;
            partial += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < SHARING_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{SHARING_INSTANCES} instances: {full} k-subsets reconstruct, {partial} (k-1)-subsets leave all 256 bytes open, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn gating() -> Outcome {
    let mut traces = 0;
    for seed in 0..20 {
        let mut cfg = ScenarioConfig::baseline("gating", seed, 12);
        cfg.adversaries = vec![adversary("b", AdversaryKind::Botnet { multiplier: 3 }, 2, -50)];
        cfg.start_time += 100;
        cfg.end_time += 100;
        cfg.duration += 100;
        let out = run(&cfg)?;
        let window_ends = out.metrics.window_ends.ok_or("not announced")?;
        ensure(window_ends == cfg.announcement.injunction_window, || {
            format!("window ends at {window_ends}")
        })?;
        for ticks in admissions_from_log(&out)?.values() {
            ensure(ticks.iter().all(|&t| t >= window_ends && t >= cfg.start_time), || {
                format!("seed {seed}: admission before commencement")
            })?;
        }
        ensure(out.metrics.rejects.contains_key("assembly_inactive"), || {
            "early probes were not refused".into()
        })?;
        traces += 1;
    }
    let base_cfg = ScenarioConfig::baseline("delay", 4, 12);
    let base = run(&base_cfg)?.metrics.first_admission.ok_or("no admission")?;
    let mut shifts = Vec::new();
    for d in [1, 60, 3600, 86_399] {
        let mut cfg = base_cfg.clone();
        cfg.duration += d;
        cfg.injunctions = vec![(1000, InjunctionDecision::Delay(d))];
        let first = run(&cfg)?.metrics.first_admission.ok_or("no admission after delay")?;
        ensure(first == base + d, || {
            format!("delay {d} moved first admission to {first}")
        })?;
        shifts.push(d);
    }
    Ok(format!(
        "window 345600s, {traces} traces with early probes admit nothing early; delay(d) shifts first admission by d for d in {shifts:?}"
    ))
}

fn visibility() -> Outcome {
    let mut runs = 0;
    for seed in 0..10 {
        let mut cfg = ScenarioConfig::baseline("visible", seed, 30 + seed);
        cfg.adversaries = vec![adversary("d", AdversaryKind::Disruptor { shares_submitted: 3 }, 1, 0)];
        let out = run(&cfg)?;
        ensure(out.metrics.visibility_fraction() == 1.0, || {
            format!("seed {seed}: visibility below 1")
        })?;
        runs += 1;
    }
    let out = run(&ScenarioConfig::baseline("fuzz", 1, 10))?;
    ensure(out.board.len() >= FUZZ_BOARD_ENTRIES, || "board too short".into())?;
    let board = &out.board[..FUZZ_BOARD_ENTRIES];
    ensure(verify_chain(board), || "clean board fails".into())?;
    let text = export_board(board);
    ensure(board_verify_text(&text).code == 0, || {
        "board-verify rejects a clean board".into()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0a2d);
    let bytes = text.as_bytes();
    let mut mutations = 0;
    for pos in 0..bytes.len() {
        let random = loop {
            let b: u8 = rng.gen();
            if b != bytes[pos] {
                break b;
            }
        };
        for replacement in [bytes[pos] ^ 0x01, random] {
            let mut mutated = bytes.to_vec();
            mutated[pos] = replacement;
            let code = match String::from_utf8(mutated) {
                Ok(t) => board_verify_text(&t).code,
                Err(_) => 2,
            };
            ensure(code != 0, || format!("mutation at byte {pos} went unnoticed"))?;
            mutations += 1;
        }
    }
    Ok(format!(
        "{runs} traces at visibility 1.0; {mutations} single-byte mutations over all {} bytes of a {FUZZ_BOARD_ENTRIES}-entry export all fail board-verify",
        bytes.len()
    ))
}

fn sybil_and_disruptor() -> Outcome {
    let mut traces = 0;
    for seed in 0..12 {
        for (k, n) in [(1, 1), (2, 3), (3, 5), (4, 6)] {
            for submitted in [k, k - 1] {
                let mut cfg = ScenarioConfig::baseline("sybil-disruptor", seed, 15);
                cfg.revocation_threshold = (k, n);
                cfg.adversaries = vec![
                    adversary(
                        "s",
                        AdversaryKind::Sybil {
                            forged: 5,
                            duplicate_attempts: 2,
                        },
                        2,
                        0,
                    ),
                    adversary(
                        "d",
                        AdversaryKind::Disruptor {
                            shares_submitted: submitted,
                        },
                        1,
                        0,
                    ),
                ];
                let out = run(&cfg)?;
                let events = parse_log(&out.event_log()).map_err(|(l, e)| format!("line {l}: {e}"))?;
                let mut forged = BTreeSet::new();
                let mut admitted = BTreeSet::new();
                let mut revealed = 0;
                for e in &events {
                    match &e.kind {
                        EventKind::Reject { pseudonym, reason } if reason == "forged_credential" => {
                            forged.insert(*pseudonym);
                        }
                        EventKind::Admit { pseudonym, .. } => {
                            admitted.insert(*pseudonym);
                        }
                        EventKind::Revealed { .. } => revealed += 1,
                        _ => {}
                    }
                }
                ensure(forged.len() == 10, || {
                    format!("{} forged credentials seen", forged.len())
                })?;
                ensure(forged.is_disjoint(&admitted), || {
                    "a forged credential was admitted".into()
                })?;
                let expect = if submitted >= k { 1 } else { 0 };
                ensure(revealed == expect, || {
                    format!("seed {seed} k={k} submitted={submitted}: {revealed} reveals")
                })?;
                traces += 1;
            }
        }
    }
    Ok(format!(
        "{traces} traces: forged credentials never admitted; disruptor revealed with k shares, never with k-1"
    ))
}

fn bundled_scenarios() -> Vec<(String, ScenarioConfig)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .expect("examples directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "scenario"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .filter_map(|p| {
            let text = std::fs::read_to_string(&p).ok()?;
            let cfg = ScenarioConfig::parse(&text, Some(&dir)).ok()?;
            cfg.validate().ok()?;
            Some((p.file_name()?.to_string_lossy().into_owned(), cfg))
        })
        .collect()
}

fn determinism() -> Outcome {
    let scenarios = bundled_scenarios();
    ensure(scenarios.len() >= 5, || {
        format!("only {} bundled scenarios", scenarios.len())
    })?;
    for (name, cfg) in &scenarios {
        let a = run(cfg)?;
        let b = run(cfg)?;
        ensure(a.event_log() == b.event_log(), || format!("{name}: event logs differ"))?;
        ensure(a.board_export() == b.board_export(), || {
            format!("{name}: boards differ")
        })?;
        replay_audit(&Trace::from(&a), cfg).map_err(|e| format!("{name}: {e}"))?;
    }
    let names: Vec<&str> = scenarios.iter().map(|(n, _)| n.as_str()).collect();
    Ok(format!("byte-identical logs and clean audits for {}", names.join(", ")))
}

fn gossip_convergence() -> Outcome {
    let mut worst = Vec::new();
    for n in [16usize, 64, 128] {
        let bound = 10 * (n as f64).log2().ceil() as u64;
        let p = 2.0 * (n as f64).ln() / n as f64;
        let mut max_rounds = 0;
        for seed in 0..GOSSIP_SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let topo = Topology::random_connected(n, p, 1, &mut rng);
            let item = Item {
                kind: ItemKind::Manifest,
                digest: sha256(&[b"manifest", &seed.to_be_bytes()]),
            };
            let mut g = GossipState::new(n);
            g.inject(0, item);
            let mut rounds = 0;
            while !g.converged(&item.digest) {
                ensure(rounds < bound, || {
                    format!("N={n} seed {seed}: not converged in {bound} rounds")
                })?;
                g.round(&topo, &mut rng);
                rounds += 1;
            }
            max_rounds = max_rounds.max(rounds);
        }
        worst.push(format!("N={n}: max {max_rounds} <= {bound}"));
    }
    Ok(format!("{GOSSIP_SEEDS} seeds each, {}", worst.join("; ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 one-man-one-vote", one_man_one_vote),
        ("2 critical mass", critical_mass),
        ("3 amplification", amplification),
        ("4 threshold sharing", threshold_sharing),
        ("5 announcement gating", gating),
        ("6 visibility", visibility),
        ("7 sybil and disruptor", sybil_and_disruptor),
        ("8 determinism", determinism),
        ("9 gossip convergence", gossip_convergence),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
