//! Team-sprint round mechanics: stage preimages, the sequential per-team
//! hash chain with single-backup fault handling, chain validation, winner
//! selection and round results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::beacon::{NodeId, TeamAssignment};
use crate::hashcash::{digest_parts, meets_target, nonce_digest, NonceSearch, Target};
use crate::pow::PowProof;
use crate::word::{hex256, U256};

/// Length of a stage preimage before the nonce is appended.
pub const STAGE_PREIMAGE_LEN: usize = 54;

/// `round (8) ‖ group_id (4) ‖ stage_index (2) ‖ participant (8) ‖ input (32)`,
/// all big-endian.
pub fn stage_preimage(
    round: u64,
    group_id: u32,
    stage_index: u16,
    participant: NodeId,
    input_digest: U256,
) -> [u8; STAGE_PREIMAGE_LEN] {
    let mut out = [0u8; STAGE_PREIMAGE_LEN];
    out[0..8].copy_from_slice(&round.to_be_bytes());
    out[8..12].copy_from_slice(&group_id.to_be_bytes());
    out[12..14].copy_from_slice(&stage_index.to_be_bytes());
    out[14..22].copy_from_slice(&participant.0.to_be_bytes());
    out[22..54].copy_from_slice(&input_digest.to_be_bytes());
    out
}

/// Stage-1 input: `SHA-256(beacon value ‖ payload digest)`.
pub fn root_digest(beacon_value: U256, payload_digest: U256) -> U256 {
    digest_parts(&[&beacon_value.to_be_bytes(), &payload_digest.to_be_bytes()])
}

/// Opaque stand-in for a round's transaction data.
pub fn payload_digest(round: u64) -> U256 {
    digest_parts(&[b"payload", &round.to_be_bytes()])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageProof {
    pub stage_index: u16,
    pub participant: NodeId,
    #[serde(with = "hex256")]
    pub input_digest: U256,
    pub nonce: u64,
    #[serde(with = "hex256")]
    pub output_digest: U256,
    /// Hash evaluations of the search that produced this proof. Searches
    /// start at nonce 0, so this is always `nonce + 1`.
    pub attempts: u64,
}

/// Fields that bind a chain to its round and group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainHeader {
    pub round: u64,
    pub group_id: u32,
    pub payload_digest: U256,
    pub root_digest: U256,
}

/// A completed team chain: one stage proof per team member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink {
    pub round: u64,
    pub group_id: u32,
    #[serde(with = "hex256")]
    pub payload_digest: U256,
    #[serde(with = "hex256")]
    pub root_digest: U256,
    pub stages: Vec<StageProof>,
}

impl ChainLink {
    pub fn final_digest(&self) -> Option<U256> {
        self.stages.last().map(|s| s.output_digest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainFault {
    BadLinkage,
    BadDigest,
    MissedTarget,
    WrongParticipant,
    BadAttemptCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamFailed {
    pub failed_stage: u16,
}

/// Ticks (1-based, inclusive) during which one node was hashing for a team.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusyInterval {
    pub node: NodeId,
    pub first_tick: u64,
    pub last_tick: u64,
}

impl BusyInterval {
    pub fn len(&self) -> u64 {
        self.last_tick - self.first_tick + 1
    }

    pub fn is_empty(&self) -> bool {
        self.last_tick < self.first_tick
    }
}

/// What to do after a stage attempt is lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    /// Re-run the stage with `backup` recorded as its participant.
    Backup {
        backup: NodeId,
    },
    Abandon(TeamFailed),
}

/// One backup re-run per stage, by the next member in cyclic order.
pub fn handle_stage_failure(team: &[NodeId], failed_stage: u16, already_retried: bool) -> Recovery {
    if already_retried {
        return Recovery::Abandon(TeamFailed { failed_stage });
    }
    let pos = failed_stage as usize - 1;
    Recovery::Backup { backup: team[(pos + 1) % team.len()] }
}

/// Decides, before a stage search starts, whether that run will be lost.
/// Arguments are the 1-based stage index and whether this is the backup run.
pub trait FailureOracle {
    fn fails(&mut self, stage_index: u16, backup: bool) -> bool;
}

impl<F: FnMut(u16, bool) -> bool> FailureOracle for F {
    fn fails(&mut self, stage_index: u16, backup: bool) -> bool {
        self(stage_index, backup)
    }
}

/// Never fails.
pub struct Reliable;

impl FailureOracle for Reliable {
    fn fails(&mut self, _: u16, _: bool) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
struct ActiveStage {
    stage_index: u16,
    participant: NodeId,
    backup: bool,
    lost: bool,
    input: U256,
    search: NonceSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainStatus {
    Running,
    Complete,
    Failed(TeamFailed),
}

/// What a single [`TeamChain::step`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    /// `node` evaluated one nonce without finishing its stage.
    Hashed {
        node: NodeId,
    },
    StageDone {
        node: NodeId,
        stage_index: u16,
    },
    /// The stage run was lost and a backup takes over.
    StageLost {
        node: NodeId,
        stage_index: u16,
    },
    Completed {
        node: NodeId,
    },
    Failed {
        node: NodeId,
        failed: TeamFailed,
    },
    /// Chain already finished; nothing hashed.
    Idle,
}

/// A team's sequential chain, advanced one hash evaluation per step.
///
/// Exactly one member hashes per step, which is what lets the simulator
/// interleave teams tick by tick.
#[derive(Debug, Clone)]
pub struct TeamChain {
    header: ChainHeader,
    team: Vec<NodeId>,
    target: Target,
    budget_per_stage: u64,
    stages: Vec<StageProof>,
    active: Option<ActiveStage>,
    status: ChainStatus,
    ticks: u64,
    attempts: BTreeMap<NodeId, u64>,
    busy: Vec<BusyInterval>,
}

impl TeamChain {
    pub fn new(header: ChainHeader, team: &[NodeId], target: Target, budget_per_stage: u64) -> Self {
        assert!(!team.is_empty(), "team must not be empty");
        assert!(team.len() <= u16::MAX as usize, "team too large for a 16-bit stage index");
        assert!(budget_per_stage >= 1, "stage budget must be at least 1");
        TeamChain {
            header,
            team: team.to_vec(),
            target,
            budget_per_stage,
            stages: Vec::with_capacity(team.len()),
            active: None,
            status: ChainStatus::Running,
            ticks: 0,
            attempts: BTreeMap::new(),
            busy: Vec::new(),
        }
    }

    pub fn status(&self) -> ChainStatus {
        self.status
    }

    pub fn is_running(&self) -> bool {
        self.status == ChainStatus::Running
    }

    /// Steps taken that hashed something.
    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn attempts_by_node(&self) -> &BTreeMap<NodeId, u64> {
        &self.attempts
    }

    pub fn busy(&self) -> &[BusyInterval] {
        &self.busy
    }

    /// The finished chain, once complete.
    pub fn link(&self) -> Option<ChainLink> {
        (self.status == ChainStatus::Complete).then(|| ChainLink {
            round: self.header.round,
            group_id: self.header.group_id,
            payload_digest: self.header.payload_digest,
            root_digest: self.header.root_digest,
            stages: self.stages.clone(),
        })
    }

    fn start_stage(&mut self, participant: NodeId, backup: bool, oracle: &mut impl FailureOracle) {
        let stage_index = self.stages.len() as u16 + 1;
        let input = self.stages.last().map_or(self.header.root_digest, |s| s.output_digest);
        let pre = stage_preimage(self.header.round, self.header.group_id, stage_index, participant, input);
        let lost = oracle.fails(stage_index, backup);
        self.active = Some(ActiveStage {
            stage_index,
            participant,
            backup,
            lost,
            input,
            search: NonceSearch::new(&pre, self.target, 0),
        });
    }

    fn charge(&mut self, node: NodeId) {
        self.ticks += 1;
        *self.attempts.entry(node).or_insert(0) += 1;
        match self.busy.last_mut() {
            Some(iv) if iv.node == node && iv.last_tick + 1 == self.ticks => iv.last_tick = self.ticks,
            _ => self.busy.push(BusyInterval { node, first_tick: self.ticks, last_tick: self.ticks }),
        }
    }

    pub fn step(&mut self, oracle: &mut impl FailureOracle) -> StepEvent {
        if self.status != ChainStatus::Running {
            return StepEvent::Idle;
        }
        if self.active.is_none() {
            let primary = self.team[self.stages.len()];
            self.start_stage(primary, false, oracle);
        }
        let stage = self.active.as_mut().expect("stage started above");
        let node = stage.participant;
        let found = stage.search.step();
        let exhausted =
            found.is_none() && (stage.search.attempts() >= self.budget_per_stage || stage.search.is_spent());
        let (stage_index, lost, backup) = (stage.stage_index, stage.lost, stage.backup);
        let proof = found.map(|(nonce, digest)| StageProof {
            stage_index,
            participant: node,
            input_digest: stage.input,
            nonce,
            output_digest: digest,
            attempts: stage.search.attempts(),
        });
        self.charge(node);

        match proof {
            Some(p) if !lost => {
                self.stages.push(p);
                self.active = None;
                if self.stages.len() == self.team.len() {
                    self.status = ChainStatus::Complete;
                    StepEvent::Completed { node }
                } else {
                    StepEvent::StageDone { node, stage_index }
                }
            }
            Some(_) => self.recover(node, stage_index, backup, oracle),
            None if exhausted => self.recover(node, stage_index, backup, oracle),
            None => StepEvent::Hashed { node },
        }
    }

    fn recover(
        &mut self,
        node: NodeId,
        stage_index: u16,
        backup: bool,
        oracle: &mut impl FailureOracle,
    ) -> StepEvent {
        self.active = None;
        match handle_stage_failure(&self.team, stage_index, backup) {
            Recovery::Backup { backup } => {
                self.start_stage(backup, true, oracle);
                StepEvent::StageLost { node, stage_index }
            }
            Recovery::Abandon(failed) => {
                self.status = ChainStatus::Failed(failed);
                StepEvent::Failed { node, failed }
            }
        }
    }
}

/// Outcome of running a team chain to completion or failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeamRun {
    pub outcome: Result<ChainLink, TeamFailed>,
    pub attempts_by_node: BTreeMap<NodeId, u64>,
    pub busy: Vec<BusyInterval>,
    pub ticks: u64,
}

/// Runs every stage of `team`'s chain back to back.
pub fn run_team_chain(
    header: ChainHeader,
    team: &[NodeId],
    stage_target: Target,
    budget_per_stage: u64,
    mut oracle: impl FailureOracle,
) -> TeamRun {
    let mut chain = TeamChain::new(header, team, stage_target, budget_per_stage);
    while chain.is_running() {
        chain.step(&mut oracle);
    }
    let outcome = match chain.status() {
        ChainStatus::Complete => Ok(chain.link().expect("complete chain has a link")),
        ChainStatus::Failed(f) => Err(f),
        ChainStatus::Running => unreachable!(),
    };
    TeamRun {
        outcome,
        attempts_by_node: chain.attempts.clone(),
        busy: chain.busy.clone(),
        ticks: chain.ticks,
    }
}

/// Per-stage verdicts. A stage is valid only if it passes its own checks and
/// every earlier stage is valid; stages after the first bad one report
/// `BadLinkage`.
pub fn stage_verdicts(
    link: &ChainLink,
    assignment: &TeamAssignment,
    stage_target: Target,
) -> Vec<Result<(), ChainFault>> {
    let n = link.stages.len().max(1);
    if link.round != assignment.round
        || link.root_digest != root_digest(assignment.beacon_value, link.payload_digest)
    {
        return vec![Err(ChainFault::BadLinkage); n];
    }
    let Some(group) = assignment.group(link.group_id) else {
        return vec![Err(ChainFault::WrongParticipant); n];
    };
    if link.stages.len() != group.len() {
        return vec![Err(ChainFault::BadLinkage); n];
    }

    let mut out = Vec::with_capacity(n);
    let mut expected_input = link.root_digest;
    let mut broken = false;
    for (i, s) in link.stages.iter().enumerate() {
        if broken {
            out.push(Err(ChainFault::BadLinkage));
            continue;
        }
        let verdict = check_stage(link, group, i, s, expected_input, stage_target);
        broken = verdict.is_err();
        expected_input = s.output_digest;
        out.push(verdict);
    }
    out
}

fn check_stage(
    link: &ChainLink,
    group: &[NodeId],
    pos: usize,
    s: &StageProof,
    expected_input: U256,
    stage_target: Target,
) -> Result<(), ChainFault> {
    if s.stage_index as usize != pos + 1 || s.input_digest != expected_input {
        return Err(ChainFault::BadLinkage);
    }
    let primary = group[pos];
    let backup = group[(pos + 1) % group.len()];
    if s.participant != primary && s.participant != backup {
        return Err(ChainFault::WrongParticipant);
    }
    if s.nonce.checked_add(1) != Some(s.attempts) {
        return Err(ChainFault::BadAttemptCount);
    }
    let pre = stage_preimage(link.round, link.group_id, s.stage_index, s.participant, s.input_digest);
    if nonce_digest(&pre, s.nonce) != s.output_digest {
        return Err(ChainFault::BadDigest);
    }
    if !meets_target(s.output_digest, stage_target) {
        return Err(ChainFault::MissedTarget);
    }
    Ok(())
}

/// Recomputes every stage and checks linkage, targets and participants.
pub fn validate_chainlink(
    link: &ChainLink,
    assignment: &TeamAssignment,
    stage_target: Target,
) -> Result<(), ChainFault> {
    if link.stages.is_empty() {
        return Err(ChainFault::BadLinkage);
    }
    stage_verdicts(link, assignment, stage_target).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub group_id: u32,
    pub tick: u64,
    pub final_digest: U256,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("no group completed")]
    NoCompletion,
}

/// Earliest tick wins; ties go to the smaller final digest, then the smaller
/// group id.
pub fn identify_winner(completions: &[Completion]) -> Result<u32, ProtocolError> {
    completions
        .iter()
        .min_by_key(|c| (c.tick, c.final_digest, c.group_id))
        .map(|c| c.group_id)
        .ok_or(ProtocolError::NoCompletion)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Pow,
    Pots,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Pow => "pow",
            Protocol::Pots => "pots",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Group(u32),
    Node(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WinningProof {
    Chain(ChainLink),
    Pow(PowProof),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundResult {
    pub round: u64,
    pub protocol: Protocol,
    /// `None` when the round ran out of ticks.
    pub winner: Option<Winner>,
    pub duration_ticks: u64,
    pub attempts_by_node: BTreeMap<NodeId, u64>,
    pub proof: Option<WinningProof>,
    /// Target the attached proof was mined against.
    pub proof_target: Target,
}

impl RoundResult {
    pub fn is_complete(&self) -> bool {
        self.winner.is_some()
    }

    pub fn total_attempts(&self) -> u64 {
        self.attempts_by_node.values().sum()
    }
}
