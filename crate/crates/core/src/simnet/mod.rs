//! Deterministic round orchestration for both arms.
//!
//! Every round of the team-sprint arm selects beacon contributors against the
//! previous beacon, folds their contributions into the next beacon, forms
//! teams from it and races the team chains. The PoW arm races all nodes on
//! the same round index. All randomness comes from [`derive_rng_stream`]
//! under per-arm, per-round labels, so the arms never share a stream.

mod audit;
mod config;
mod trace;

use std::collections::BTreeMap;

pub use audit::{audit_trace, AuditIssue, AuditReport};
pub use config::{
    default_tick_budget, SimConfig, DEFAULT_BUDGET_FACTOR, DEFAULT_CONTRIBUTORS, DEFAULT_REWARD,
};
pub use trace::{
    ArmSummary, EnergyLedger, ExperimentSummary, RoundRecord, SummaryBuilder, TraceHeader, TraceLine,
    SCHEMA_VERSION,
};

use crate::beacon::{
    advance_beacon, form_teams, select_contributors, Beacon, BeaconError, EligibilityPolicy,
    EligibilityRegistry, NodeId, TeamAssignment,
};
use crate::hashcash::{digest_parts, stage_target, Target};
use crate::pow::{idealized_proof_target, run_pow_round, Mode, PowError, PowRoundParams};
use crate::protocol::{
    identify_winner, payload_digest, root_digest, run_team_chain, validate_chainlink, BusyInterval,
    ChainHeader, Completion, Protocol, RoundResult, StepEvent, TeamChain, Winner, WinningProof,
};
use crate::reward::RewardUnit;
use crate::rng::{derive_rng_stream, RngStream};
use crate::word::U256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Beacon(#[from] BeaconError),
    #[error(transparent)]
    Pow(#[from] PowError),
}

pub fn arm_label(protocol: Protocol, round: u64) -> Vec<u8> {
    match protocol {
        Protocol::Pots => format!("arm/pots/round/{round}").into_bytes(),
        Protocol::Pow => format!("arm/pow/round/{round}").into_bytes(),
    }
}

/// Per-node secret, the first block of the node's own stream.
pub fn node_secret(seed: u64, node: NodeId) -> [u8; 32] {
    let mut label = b"node/".to_vec();
    label.extend_from_slice(&node.0.to_be_bytes());
    derive_rng_stream(seed, &label).block(0)
}

/// A node's beacon contribution for `round`: `SHA-256(secret ‖ round)`.
pub fn contribution(seed: u64, node: NodeId, round: u64) -> U256 {
    digest_parts(&[&node_secret(seed, node), &round.to_be_bytes()])
}

/// One team-sprint round, before any ledger is touched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotsRound {
    pub result: RoundResult,
    pub beacon: Beacon,
    pub assignment: TeamAssignment,
    pub busy: Vec<Vec<BusyInterval>>,
}

/// Stage target whose proofs a round's trace must carry.
pub fn pots_proof_target(cfg: &SimConfig) -> Target {
    let t = stage_target(cfg.target, cfg.group_size);
    match cfg.mode {
        Mode::Idealized => idealized_proof_target(t),
        Mode::Stochastic => t,
    }
}

pub fn pow_proof_target(cfg: &SimConfig) -> Target {
    match cfg.mode {
        Mode::Idealized => idealized_proof_target(cfg.target),
        Mode::Stochastic => cfg.target,
    }
}

pub fn run_round_pots(cfg: &SimConfig, prev: &Beacon, eligible: &[NodeId]) -> Result<PotsRound, SimError> {
    let round = prev.round + 1;
    let k = cfg.contributor_count;
    let selected = select_contributors(prev.value, eligible, k)?;
    let contributions: Vec<(NodeId, U256)> =
        selected.iter().map(|&n| (n, contribution(cfg.seed, n, round))).collect();
    let beacon = advance_beacon(prev, &contributions, eligible, k)?;
    let assignment = form_teams(round, beacon.value, eligible, cfg.group_size)?;
    let mut rng = derive_rng_stream(cfg.seed, &arm_label(Protocol::Pots, round));

    let (result, busy) = match cfg.mode {
        Mode::Idealized => idealized_pots(cfg, &assignment, &mut rng)?,
        Mode::Stochastic => stochastic_pots(cfg, &assignment, &mut rng),
    };
    Ok(PotsRound { result, beacon, assignment, busy })
}

fn chain_header(a: &TeamAssignment, group_id: u32) -> ChainHeader {
    let payload = payload_digest(a.round);
    ChainHeader {
        round: a.round,
        group_id,
        payload_digest: payload,
        root_digest: root_digest(a.beacon_value, payload),
    }
}

fn stochastic_pots(
    cfg: &SimConfig,
    a: &TeamAssignment,
    rng: &mut RngStream,
) -> (RoundResult, Vec<Vec<BusyInterval>>) {
    let t_stage = stage_target(cfg.target, cfg.group_size);
    let mut chains: Vec<TeamChain> = a
        .groups
        .iter()
        .enumerate()
        .map(|(g, team)| TeamChain::new(chain_header(a, g as u32), team, t_stage, cfg.tick_budget))
        .collect();
    let f = cfg.failure_prob;
    let mut oracle = |_: u16, _: bool| rng.bernoulli(f);

    let mut winner = None;
    let mut tick = 0;
    while tick < cfg.tick_budget && winner.is_none() && chains.iter().any(TeamChain::is_running) {
        tick += 1;
        let mut completions = Vec::new();
        for (g, chain) in chains.iter_mut().enumerate() {
            if let StepEvent::Completed { .. } = chain.step(&mut oracle) {
                let link = chain.link().expect("completed");
                // an invalid chain drops out of the race
                if validate_chainlink(&link, a, t_stage).is_ok() {
                    let final_digest = link.final_digest().expect("non-empty");
                    completions.push(Completion { group_id: g as u32, tick, final_digest });
                }
            }
        }
        winner = identify_winner(&completions).ok();
    }
    if winner.is_some() {
        for _ in 0..cfg.latency_ticks {
            for chain in chains.iter_mut() {
                chain.step(&mut oracle);
            }
        }
    }

    let mut attempts = BTreeMap::new();
    for chain in &chains {
        for (node, n) in chain.attempts_by_node() {
            *attempts.entry(*node).or_insert(0) += n;
        }
    }
    let proof = winner.map(|g| WinningProof::Chain(chains[g as usize].link().expect("winner completed")));
    let busy = chains.iter().map(|c| c.busy().to_vec()).collect();
    let result = RoundResult {
        round: a.round,
        protocol: Protocol::Pots,
        winner: winner.map(Winner::Group),
        duration_ticks: tick,
        attempts_by_node: attempts,
        proof,
        proof_target: t_stage,
    };
    (result, busy)
}

/// One team's analytic timeline in an idealized round.
struct PlannedChain {
    busy: Vec<BusyInterval>,
    end: u64,
    completed: bool,
    /// `(stage_index, backup)` runs that were lost.
    lost: Vec<(u16, bool)>,
}

/// Each team's chain costs exactly the expected solve work, split as evenly
/// as integers allow across its stages. A lost stage run costs its share
/// again for the backup.
fn plan_idealized(team: &[NodeId], work: u64, f: f64, rng: &mut RngStream) -> PlannedChain {
    let shares = u64::split(&work, team.len());
    let mut plan = PlannedChain { busy: Vec::new(), end: 0, completed: true, lost: Vec::new() };
    let run = |plan: &mut PlannedChain, node: NodeId, cost: u64| {
        if cost > 0 {
            plan.busy.push(BusyInterval { node, first_tick: plan.end + 1, last_tick: plan.end + cost });
            plan.end += cost;
        }
    };
    for (pos, &cost) in shares.iter().enumerate() {
        let stage = pos as u16 + 1;
        let primary_lost = rng.bernoulli(f);
        run(&mut plan, team[pos], cost);
        if primary_lost {
            plan.lost.push((stage, false));
            let backup_lost = rng.bernoulli(f);
            run(&mut plan, team[(pos + 1) % team.len()], cost);
            if backup_lost {
                plan.lost.push((stage, true));
                plan.completed = false;
                break;
            }
        }
    }
    plan
}

fn clip(busy: &[BusyInterval], stop: u64) -> Vec<BusyInterval> {
    busy.iter()
        .filter(|iv| iv.first_tick <= stop)
        .map(|iv| BusyInterval { last_tick: iv.last_tick.min(stop), ..*iv })
        .collect()
}

fn idealized_pots(
    cfg: &SimConfig,
    a: &TeamAssignment,
    rng: &mut RngStream,
) -> Result<(RoundResult, Vec<Vec<BusyInterval>>), SimError> {
    let work = cfg.expected_work().ok_or(PowError::WorkOverflow)?;
    let plans: Vec<PlannedChain> =
        a.groups.iter().map(|team| plan_idealized(team, work, cfg.failure_prob, rng)).collect();

    let finish = plans.iter().filter(|p| p.completed && p.end <= cfg.tick_budget).map(|p| p.end).min();
    let winner = finish.map(|t| {
        let tied: Vec<u32> = plans
            .iter()
            .enumerate()
            .filter(|(_, p)| p.completed && p.end == t)
            .map(|(g, _)| g as u32)
            .collect();
        tied[rng.below(tied.len() as u64) as usize]
    });
    let stop = match finish {
        Some(t) => t + cfg.latency_ticks,
        None => cfg.tick_budget,
    };

    let busy: Vec<Vec<BusyInterval>> = plans.iter().map(|p| clip(&p.busy, stop)).collect();
    let mut attempts = BTreeMap::new();
    for iv in busy.iter().flatten() {
        *attempts.entry(iv.node).or_insert(0) += iv.len();
    }

    let proof_target = pots_proof_target(cfg);
    let proof = winner.map(|g| {
        let lost = &plans[g as usize].lost;
        let replay = |stage: u16, backup: bool| lost.contains(&(stage, backup));
        let team = a.group(g).expect("winner is a group");
        let run = run_team_chain(chain_header(a, g), team, proof_target, u64::MAX, replay);
        match run.outcome {
            Ok(link) => WinningProof::Chain(link),
            Err(_) => unreachable!("winning plan has no double loss"),
        }
    });
    let result = RoundResult {
        round: a.round,
        protocol: Protocol::Pots,
        winner: winner.map(Winner::Group),
        duration_ticks: finish.unwrap_or(cfg.tick_budget),
        attempts_by_node: attempts,
        proof,
        proof_target,
    };
    Ok((result, busy))
}

/// One PoW round over `miners` for `round`.
pub fn run_round_pow(cfg: &SimConfig, round: u64, miners: &[NodeId]) -> Result<RoundResult, SimError> {
    let mut rng = derive_rng_stream(cfg.seed, &arm_label(Protocol::Pow, round));
    let params = PowRoundParams {
        round,
        target: cfg.target,
        mode: cfg.mode,
        tick_budget: cfg.tick_budget,
        latency_ticks: if cfg.mode == Mode::Idealized { 0 } else { cfg.latency_ticks },
    };
    Ok(run_pow_round(miners, params, &mut rng)?)
}

/// Round-by-round driver for both arms.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    beacon: Beacon,
    registry: EligibilityRegistry,
    nodes: Vec<NodeId>,
    summary: SummaryBuilder,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Simulation, SimError> {
        cfg.validate()?;
        let policy = EligibilityPolicy { min_participation: cfg.min_participation };
        let mut registry = EligibilityRegistry::new(policy);
        let nodes: Vec<NodeId> = (0..cfg.n).map(NodeId).collect();
        // founding nodes start out meeting the participation minimum
        for &n in &nodes {
            registry.register(n, cfg.min_participation);
        }
        Ok(Simulation {
            beacon: Beacon::genesis(cfg.genesis),
            summary: SummaryBuilder::new(cfg.clone()),
            registry,
            nodes,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn beacon(&self) -> &Beacon {
        &self.beacon
    }

    pub fn rounds_done(&self) -> u64 {
        self.beacon.round
    }

    pub fn is_finished(&self) -> bool {
        self.beacon.round >= self.cfg.rounds
    }

    /// Runs the next round of both arms.
    pub fn step(&mut self) -> Result<RoundRecord, SimError> {
        let eligible = self.registry.eligible();
        let pots = run_round_pots(&self.cfg, &self.beacon, &eligible)?;
        let pow = run_round_pow(&self.cfg, pots.beacon.round, &self.nodes)?;
        self.registry.record_assignment(&pots.assignment);
        self.beacon = pots.beacon.clone();
        let rec = RoundRecord {
            schema: SCHEMA_VERSION,
            round: pots.beacon.round,
            eligible,
            beacon: pots.beacon,
            assignment: pots.assignment,
            pots: pots.result,
            pots_busy: pots.busy,
            pow,
        };
        self.summary.add(&rec);
        Ok(rec)
    }

    pub fn summary(&self) -> ExperimentSummary {
        self.summary.finish()
    }
}

/// Summary plus the full per-round trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub summary: ExperimentSummary,
    pub trace: Vec<RoundRecord>,
}

impl Experiment {
    /// Header line followed by one line per round.
    pub fn to_ndjson(&self) -> String {
        let mut out = header_line(&self.summary.config);
        for r in &self.trace {
            out.push_str(&round_line(r));
        }
        out
    }
}

pub fn header_line(cfg: &SimConfig) -> String {
    let h = TraceLine::Header(TraceHeader { schema: SCHEMA_VERSION, config: cfg.clone() });
    let mut s = serde_json::to_string(&h).expect("trace header serializes");
    s.push('\n');
    s
}

pub fn round_line(r: &RoundRecord) -> String {
    let mut s = serde_json::to_string(&TraceLine::Round(Box::new(r.clone()))).expect("round serializes");
    s.push('\n');
    s
}

pub fn run_experiment(cfg: &SimConfig) -> Result<Experiment, SimError> {
    let mut sim = Simulation::new(cfg.clone())?;
    let mut trace = Vec::with_capacity(cfg.rounds.min(1 << 16) as usize);
    while !sim.is_finished() {
        trace.push(sim.step()?);
    }
    Ok(Experiment { summary: sim.summary(), trace })
}

/// Whether a team never has two members hashing in the same tick.
pub fn busy_is_sequential(busy: &[BusyInterval]) -> bool {
    busy.iter().all(|iv| iv.first_tick >= 1 && iv.first_tick <= iv.last_tick)
        && busy.windows(2).all(|w| w[0].last_tick < w[1].first_tick)
}
