//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use pots_cli::{parse_config_str, run_scenario, RESULTS_FILE, TRACE_FILE};
use pots_core::beacon::{verify_beacon, Beacon, NodeId};
use pots_core::hashcash::Target;
use pots_core::pow::Mode;
use pots_core::protocol::{validate_chainlink, ChainLink, Winner, WinningProof};
use pots_core::simnet::{busy_is_sequential, run_experiment, Experiment, SimConfig};
use pots_core::stats::chi_square_uniform;
use pots_core::U256;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RATIO_RUNTIME_LIMIT: Duration = Duration::from_secs(5);
const REWARD_TOLERANCE: f64 = 0.15;
const POW_DURATION_TOLERANCE: f64 = 0.20;
const ORACLE_RATIO_TOLERANCE: f64 = 0.15;
const ORACLE_SAMPLES: u64 = 400_000;
const MUTATIONS: usize = 1_000;
const CHI_SQUARE_ALPHA: f64 = 0.001;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cfg(seed: u64, n: u64, group_size: usize, rounds: u64, exponent: u32) -> SimConfig {
    SimConfig::new(seed, n, group_size, rounds, Target::from_exponent(exponent).unwrap())
}

fn run(c: &SimConfig) -> Experiment {
    run_experiment(c).expect("valid config runs")
}

fn energy_ratio_idealized() -> Outcome {
    let start = Instant::now();
    let main = run(&cfg(1, 64, 8, 100, 240));
    let elapsed = start.elapsed();
    let mut detail = format!("n=64 N=8 ratio={:?} in {elapsed:?}", main.summary.energy_ratio);
    let mut ok = main.summary.energy_ratio == Some(0.125) && elapsed < RATIO_RUNTIME_LIMIT;
    for g in [1usize, 2, 4, 8, 16] {
        let r = run(&cfg(2, 64, g, 20, 240)).summary.energy_ratio;
        ok &= r == Some(1.0 / g as f64);
        detail.push_str(&format!("; N={g}: {r:?}"));
    }
    check(ok, detail)
}

fn pow_total_idealized() -> Outcome {
    let c = cfg(3, 3, 1, 200, 252);
    assert_eq!(c.expected_work(), Some(16));
    let exp = run(&c);
    let per_round: Vec<u64> = exp.trace.iter().map(|r| r.pow.total_attempts()).collect();
    let bad = per_round.iter().filter(|&&a| a != 48).count();
    check(
        bad == 0 && exp.summary.pow.total_energy == 48 * 200,
        format!("{} rounds, {bad} not equal to 48, total {}", per_round.len(), exp.summary.pow.total_energy),
    )
}

fn expected_reward() -> Outcome {
    let rounds = 20_000u64;
    let mut c = cfg(4, 32, 4, rounds, 240);
    c.reward = 1_000_000;
    let exp = run(&c);
    let fair = c.reward as f64 / c.n as f64;
    let mut detail = String::new();
    let mut ok = true;
    for (label, arm) in [("pots", &exp.summary.pots), ("pow", &exp.summary.pow)] {
        let worst = arm
            .rewards
            .values()
            .map(|&r| ((r as f64 / rounds as f64) - fair).abs() / fair)
            .fold(0.0, f64::max);
        let total_ok = arm.reward_total() == rounds * c.reward && arm.rewards.len() == 32;
        ok &= worst <= REWARD_TOLERANCE && total_ok;
        detail.push_str(&format!(
            "{label}: worst deviation {:.2}%, total {} (exact: {total_ok}); ",
            100.0 * worst,
            arm.reward_total()
        ));
    }
    check(ok, detail.trim_end_matches("; ").to_string())
}

fn stochastic_oracle() -> Outcome {
    let (n, g, e) = (4u64, 2usize, 248u32);
    let p = 2f64.powi(e as i32 - 256);
    let exp = run(&cfg(5, n, g, 500, e).with_mode(Mode::Stochastic));
    let analytic = 1.0 / (1.0 - (1.0 - p).powi(n as i32));
    let pow_mean = exp.summary.pow.mean_duration_ticks;
    let pow_dev = (pow_mean - analytic).abs() / analytic;

    let reference = oracle::energy_ratio(0x5eed, ORACLE_SAMPLES, n, g as u64, p);
    let ratio = exp.summary.energy_ratio.unwrap_or(f64::NAN);
    let ratio_dev = (ratio - reference).abs() / reference;
    let complete = exp.summary.pots.incomplete_rounds == 0 && exp.summary.pow.incomplete_rounds == 0;
    check(
        complete && pow_dev <= POW_DURATION_TOLERANCE && ratio_dev <= ORACLE_RATIO_TOLERANCE,
        format!(
            "pow mean duration {pow_mean:.2} vs {analytic:.2} ({:.1}%); pots ratio {ratio:.4} vs oracle {reference:.4} ({:.1}%)",
            100.0 * pow_dev,
            100.0 * ratio_dev
        ),
    )
}

/// A valid chain together with everything needed to validate it.
struct ChainCase {
    link: ChainLink,
    assignment: pots_core::TeamAssignment,
    target: Target,
}

struct BeaconCase {
    beacon: Beacon,
    prev: Beacon,
    eligible: Vec<NodeId>,
    k: usize,
}

fn valid_cases() -> (Vec<ChainCase>, Vec<BeaconCase>) {
    let mut chains = Vec::new();
    let mut beacons = Vec::new();
    for (seed, n, g) in [(10u64, 8u64, 4usize), (11, 9, 3), (12, 12, 2), (13, 6, 6)] {
        let mut c = cfg(seed, n, g, 150, 250).with_mode(Mode::Stochastic);
        c.failure_prob = 0.1;
        c.contributor_count = 3;
        let exp = run(&c);
        let mut prev = Beacon::genesis(c.genesis);
        for r in exp.trace {
            if let Some(WinningProof::Chain(link)) = &r.pots.proof {
                chains.push(ChainCase {
                    link: link.clone(),
                    assignment: r.assignment.clone(),
                    target: r.pots.proof_target,
                });
            }
            let b = r.beacon.clone();
            beacons.push(BeaconCase {
                beacon: b.clone(),
                prev,
                eligible: r.eligible.clone(),
                k: c.contributor_count,
            });
            prev = b;
        }
    }
    (chains, beacons)
}

fn other_u64(rng: &mut ChaCha8Rng, old: u64) -> u64 {
    // small shifts hit near-miss values, full draws hit everything else
    let v = if rng.random_bool(0.5) { old.wrapping_add(rng.random_range(1..4)) } else { rng.random() };
    if v == old {
        old ^ 1
    } else {
        v
    }
}

fn other_u256(rng: &mut ChaCha8Rng, old: U256) -> U256 {
    if rng.random_bool(0.5) {
        old ^ (U256::one() << rng.random_range(0..256usize))
    } else {
        let v = U256::from_be_bytes(&rng.random::<[u8; 32]>());
        if v == old {
            !old
        } else {
            v
        }
    }
}

fn mutate_chain(link: &ChainLink, rng: &mut ChaCha8Rng) -> (ChainLink, String) {
    let mut m = link.clone();
    let i = rng.random_range(0..m.stages.len());
    let field = rng.random_range(0..11);
    let name = match field {
        0 => {
            m.round = other_u64(rng, m.round);
            "round"
        }
        1 => {
            m.group_id = other_u64(rng, m.group_id as u64) as u32;
            if m.group_id == link.group_id {
                m.group_id ^= 1;
            }
            "group_id"
        }
        2 => {
            m.payload_digest = other_u256(rng, m.payload_digest);
            "payload_digest"
        }
        3 => {
            m.root_digest = other_u256(rng, m.root_digest);
            "root_digest"
        }
        4 => {
            let s = &mut m.stages[i].stage_index;
            *s = other_u64(rng, *s as u64) as u16;
            if *s == link.stages[i].stage_index {
                *s ^= 1;
            }
            "stage_index"
        }
        5 => {
            m.stages[i].participant = NodeId(other_u64(rng, m.stages[i].participant.0));
            "participant"
        }
        6 => {
            m.stages[i].input_digest = other_u256(rng, m.stages[i].input_digest);
            "input_digest"
        }
        7 => {
            m.stages[i].nonce = other_u64(rng, m.stages[i].nonce);
            "nonce"
        }
        8 => {
            m.stages[i].output_digest = other_u256(rng, m.stages[i].output_digest);
            "output_digest"
        }
        9 => {
            m.stages[i].attempts = other_u64(rng, m.stages[i].attempts);
            "attempts"
        }
        _ => {
            if rng.random_bool(0.5) || m.stages.len() == 1 {
                let s = m.stages[i].clone();
                m.stages.insert(i, s);
            } else {
                m.stages.remove(i);
            }
            "stages"
        }
    };
    (m, name.to_string())
}

fn mutate_beacon(b: &Beacon, rng: &mut ChaCha8Rng) -> (Beacon, String) {
    let mut m = b.clone();
    let i = rng.random_range(0..m.contributors.len());
    let name = match rng.random_range(0..5) {
        0 => {
            m.round = other_u64(rng, m.round);
            "round"
        }
        1 => {
            m.value = other_u256(rng, m.value);
            "value"
        }
        2 => {
            m.prev_value = other_u256(rng, m.prev_value);
            "prev_value"
        }
        3 => {
            // another node, eligible or not, in one slot
            let old = m.contributors[i].0;
            m.contributors[i] =
                NodeId(if rng.random_bool(0.5) { (old + rng.random_range(1..6)) % 16 } else { rng.random() });
            if m.contributors[i].0 == old {
                m.contributors[i] = NodeId(old ^ 1);
            }
            "contributors"
        }
        _ => {
            m.contributions[i] = other_u256(rng, m.contributions[i]);
            "contributions"
        }
    };
    (m, name.to_string())
}

fn validation_soundness() -> Outcome {
    let (chains, beacons) = valid_cases();
    let false_rejects =
        chains.iter().filter(|c| validate_chainlink(&c.link, &c.assignment, c.target).is_err()).count()
            + beacons.iter().filter(|b| verify_beacon(&b.beacon, &b.prev, &b.eligible, b.k).is_err()).count();

    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut accepted: Vec<String> = Vec::new();
    let mut tried = 0;
    for i in 0..MUTATIONS {
        tried += 1;
        if i % 2 == 0 {
            let c = &chains[rng.random_range(0..chains.len())];
            let (m, field) = mutate_chain(&c.link, &mut rng);
            if validate_chainlink(&m, &c.assignment, c.target).is_ok() {
                accepted.push(format!("chain.{field}"));
            }
        } else {
            let b = &beacons[rng.random_range(0..beacons.len())];
            let (m, field) = mutate_beacon(&b.beacon, &mut rng);
            if verify_beacon(&m, &b.prev, &b.eligible, b.k).is_ok() {
                accepted.push(format!("beacon.{field}"));
            }
        }
    }
    check(
        accepted.is_empty() && false_rejects == 0,
        format!(
            "{tried} mutations over {} chains / {} beacons: {} false accepts {accepted:?}, {false_rejects} false rejects",
            chains.len(),
            beacons.len(),
            accepted.len()
        ),
    )
}

fn partition_and_busy() -> Outcome {
    let mut c = cfg(6, 10, 3, 10_000, 249).with_mode(Mode::Stochastic);
    c.failure_prob = 0.05;
    c.latency_ticks = 2;
    let exp = run(&c);
    let mut bad_partition = 0;
    let mut bad_busy = 0;
    for r in &exp.trace {
        let mut seen: BTreeMap<NodeId, u32> = BTreeMap::new();
        for node in r.assignment.groups.iter().flatten().chain(&r.assignment.benched) {
            *seen.entry(*node).or_default() += 1;
        }
        let exact = seen.values().all(|&k| k == 1) && seen.keys().copied().eq(r.eligible.iter().copied());
        if !exact || !r.assignment.is_partition_of(&r.eligible) {
            bad_partition += 1;
        }
        let mut from_busy: BTreeMap<NodeId, u64> = BTreeMap::new();
        let mut shaped = r.pots_busy.len() == r.assignment.groups.len();
        for (team, busy) in r.assignment.groups.iter().zip(&r.pots_busy) {
            shaped &= busy_is_sequential(busy) && busy.iter().all(|iv| team.contains(&iv.node));
            for iv in busy {
                *from_busy.entry(iv.node).or_default() += iv.len();
            }
        }
        let charged: BTreeMap<NodeId, u64> =
            r.pots.attempts_by_node.iter().filter(|(_, &a)| a > 0).map(|(k, v)| (*k, *v)).collect();
        if !shaped || from_busy != charged {
            bad_busy += 1;
        }
    }
    check(
        exp.trace.len() == 10_000 && bad_partition == 0 && bad_busy == 0,
        format!(
            "{} rounds: {bad_partition} partition violations, {bad_busy} busy-shape violations",
            exp.trace.len()
        ),
    )
}

fn collect_traces(dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_traces(&p, out);
        } else if p.file_name().is_some_and(|f| f == TRACE_FILE) {
            out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
        }
    }
}

fn determinism() -> Outcome {
    let scenario = r#"{"scenarios":[
        {"name":"mixed","seed":77,"n":12,"N":3,"rounds":40,"target_exponent":249,"latency_ticks":1,
         "sweep":{"mode":["idealized","stochastic"],"failure_prob":[0.0,0.1]}},
        {"name":"ratio","seed":78,"n":16,"N":1,"rounds":20,"target_exponent":244,"sweep":{"N":[1,2,4,8]}}]}"#;
    let sc = parse_config_str(scenario, "determinism").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_scenario(&sc, &a, Some(3)).unwrap();
    run_scenario(&sc, &b, Some(1)).unwrap();
    let csv_same = fs::read(a.join(RESULTS_FILE)).unwrap() == fs::read(b.join(RESULTS_FILE)).unwrap();
    let (mut ta, mut tb) = (Vec::new(), Vec::new());
    collect_traces(&a, &mut ta);
    collect_traces(&b, &mut tb);
    let traces_same = ta == tb;
    check(
        csv_same && traces_same && ta.len() == sc.cells.len(),
        format!("{} cells: results.csv identical {csv_same}, traces identical {traces_same}", sc.cells.len()),
    )
}

fn uniformity() -> Outcome {
    let (n, g) = (16u64, 4usize);
    let exp = run(&cfg(8, n, g, 10_000, 240));
    let mut pow = vec![0u64; n as usize];
    let mut pots = vec![0u64; n as usize / g];
    let mut pairs = vec![0u64; (n * (n - 1) / 2) as usize];
    let pair = |a: u64, b: u64| {
        let (a, b) = (a.min(b), a.max(b));
        (a * (2 * n - a - 1) / 2 + (b - a - 1)) as usize
    };
    for r in &exp.trace {
        if let Some(Winner::Node(m)) = r.pow.winner {
            pow[m.0 as usize] += 1;
        }
        if let Some(Winner::Group(gid)) = r.pots.winner {
            pots[gid as usize] += 1;
        }
        for team in &r.assignment.groups {
            for (i, a) in team.iter().enumerate() {
                for b in &team[i + 1..] {
                    pairs[pair(a.0, b.0)] += 1;
                }
            }
        }
    }
    let tests = [
        ("pow winners", chi_square_uniform(&pow)),
        ("pots winners", chi_square_uniform(&pots)),
        ("co-membership", chi_square_uniform(&pairs)),
    ];
    let ok = tests.iter().all(|(_, t)| t.passes(CHI_SQUARE_ALPHA))
        && pow.iter().sum::<u64>() == 10_000
        && pots.iter().sum::<u64>() == 10_000;
    let detail = tests
        .iter()
        .map(|(name, t)| {
            format!("{name}: chi2={:.1} df={} p={:.4}", t.statistic, t.degrees_of_freedom, t.p_value)
        })
        .collect::<Vec<_>>()
        .join("; ");
    check(ok, detail)
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("energy ratio (idealized)", energy_ratio_idealized),
        ("pow total (idealized)", pow_total_idealized),
        ("expected reward", expected_reward),
        ("stochastic oracle equivalence", stochastic_oracle),
        ("validation soundness", validation_soundness),
        ("partition and busy-time invariants", partition_and_busy),
        ("determinism", determinism),
        ("uniformity", uniformity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{}] {name} ({:.2?}): {detail}", i + 1, start.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
