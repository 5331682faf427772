//! Proof-of-work baseline: every miner races the same target in lockstep.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::beacon::NodeId;
use crate::hashcash::{meets_target, nonce_digest, search, NonceSearch, SearchOutcome, Target};
use crate::protocol::{Protocol, RoundResult, Winner, WinningProof};
use crate::rng::RngStream;
use crate::word::{hex256, U256};

/// Energy model for a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every participant is charged the analytic expected work and all
    /// finish together; latency is zero.
    Idealized,
    /// Real hashing, one nonce per active node per tick.
    Stochastic,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Idealized => "idealized",
            Mode::Stochastic => "stochastic",
        })
    }
}

/// Idealized rounds attach proofs mined against a target no harder than
/// `2^252`, so structure is exercised without paying the analytic work.
pub fn idealized_proof_target(t: Target) -> Target {
    t.max(Target::from_exponent(252).expect("in range"))
}

/// `round (8) ‖ miner (8)`; the nonce follows.
pub fn pow_preimage(round: u64, miner: NodeId) -> [u8; 16] {
    let mut out = [0u8; 16];
    out[..8].copy_from_slice(&round.to_be_bytes());
    out[8..].copy_from_slice(&miner.0.to_be_bytes());
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowProof {
    pub round: u64,
    pub miner: NodeId,
    pub nonce: u64,
    #[serde(with = "hex256")]
    pub output_digest: U256,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowFault {
    BadDigest,
    MissedTarget,
}

pub fn verify_pow_proof(p: &PowProof, t: Target) -> Result<(), PowFault> {
    if nonce_digest(&pow_preimage(p.round, p.miner), p.nonce) != p.output_digest {
        return Err(PowFault::BadDigest);
    }
    if !meets_target(p.output_digest, t) {
        return Err(PowFault::MissedTarget);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PowError {
    #[error("no miners")]
    NoMiners,
    #[error("expected work of the target does not fit in 64 bits")]
    WorkOverflow,
    #[error("duplicate miner {0}")]
    DuplicateMiner(NodeId),
}

#[derive(Debug, Clone, Copy)]
pub struct PowRoundParams {
    pub round: u64,
    pub target: Target,
    pub mode: Mode,
    pub tick_budget: u64,
    /// Ticks losers keep hashing after the winning tick.
    pub latency_ticks: u64,
}

/// One PoW round. Running out of ticks in stochastic mode yields a result
/// without a winner rather than an error.
pub fn run_pow_round(
    miners: &[NodeId],
    params: PowRoundParams,
    rng: &mut RngStream,
) -> Result<RoundResult, PowError> {
    if miners.is_empty() {
        return Err(PowError::NoMiners);
    }
    let mut sorted = miners.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(PowError::DuplicateMiner(w[0]));
    }
    match params.mode {
        Mode::Idealized => idealized_round(miners, params, rng),
        Mode::Stochastic => Ok(stochastic_round(miners, params)),
    }
}

fn idealized_round(
    miners: &[NodeId],
    params: PowRoundParams,
    rng: &mut RngStream,
) -> Result<RoundResult, PowError> {
    let work = params.target.expected_work_u64().ok_or(PowError::WorkOverflow)?;
    let attempts_by_node: BTreeMap<NodeId, u64> = miners.iter().map(|&m| (m, work)).collect();
    let proof_target = idealized_proof_target(params.target);
    if work > params.tick_budget {
        return Ok(RoundResult {
            round: params.round,
            protocol: Protocol::Pow,
            winner: None,
            duration_ticks: params.tick_budget,
            attempts_by_node: miners.iter().map(|&m| (m, params.tick_budget)).collect(),
            proof: None,
            proof_target,
        });
    }
    let winner = miners[rng.below(miners.len() as u64) as usize];
    let pre = pow_preimage(params.round, winner);
    let SearchOutcome::Found { nonce, digest, .. } = search(&pre, proof_target, 0, u64::MAX) else {
        unreachable!("a 2^-4 target cannot exhaust the nonce space");
    };
    Ok(RoundResult {
        round: params.round,
        protocol: Protocol::Pow,
        winner: Some(Winner::Node(winner)),
        duration_ticks: work,
        attempts_by_node,
        proof: Some(WinningProof::Pow(PowProof {
            round: params.round,
            miner: winner,
            nonce,
            output_digest: digest,
        })),
        proof_target,
    })
}

fn stochastic_round(miners: &[NodeId], params: PowRoundParams) -> RoundResult {
    let mut searches: Vec<(NodeId, NonceSearch)> = miners
        .iter()
        .map(|&m| (m, NonceSearch::new(&pow_preimage(params.round, m), params.target, 0)))
        .collect();

    let mut best: Option<(U256, NodeId, u64)> = None;
    let mut tick = 0;
    while tick < params.tick_budget && best.is_none() {
        tick += 1;
        for (miner, s) in searches.iter_mut() {
            if let Some((nonce, d)) = s.step() {
                if best.is_none_or(|(bd, bm, _)| (d, *miner) < (bd, bm)) {
                    best = Some((d, *miner, nonce));
                }
            }
        }
    }

    let (winner, proof, charged) = match best {
        Some((digest, miner, nonce)) => (
            Some(Winner::Node(miner)),
            Some(WinningProof::Pow(PowProof { round: params.round, miner, nonce, output_digest: digest })),
            Some(miner),
        ),
        None => (None, None, None),
    };
    let attempts_by_node = miners
        .iter()
        .map(|&m| {
            let extra = if charged.is_some_and(|w| w != m) { params.latency_ticks } else { 0 };
            (m, tick + extra)
        })
        .collect();

    RoundResult {
        round: params.round,
        protocol: Protocol::Pow,
        winner,
        duration_ticks: tick,
        attempts_by_node,
        proof,
        proof_target: params.target,
    }
}
