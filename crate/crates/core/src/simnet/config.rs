use serde::{Deserialize, Serialize};

use crate::hashcash::Target;
use crate::pow::Mode;
use crate::word::{hex256, U256};

use super::SimError;

/// Default contributors per beacon round (clamped to `n`).
pub const DEFAULT_CONTRIBUTORS: usize = 4;
/// Default reward per round, in micro-units.
pub const DEFAULT_REWARD: u64 = 1_000_000;
/// Default tick budget, as a multiple of the expected solve work.
pub const DEFAULT_BUDGET_FACTOR: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n: u64,
    #[serde(rename = "N")]
    pub group_size: usize,
    pub rounds: u64,
    pub target: Target,
    pub mode: Mode,
    pub latency_ticks: u64,
    pub failure_prob: f64,
    /// Reward per round in micro-units.
    pub reward: u64,
    pub contributor_count: usize,
    pub min_participation: u64,
    pub tick_budget: u64,
    #[serde(with = "hex256")]
    pub genesis: U256,
}

impl SimConfig {
    /// Idealized, zero latency, no failures, default reward and contributors.
    pub fn new(seed: u64, n: u64, group_size: usize, rounds: u64, target: Target) -> SimConfig {
        SimConfig {
            seed,
            n,
            group_size,
            rounds,
            target,
            mode: Mode::Idealized,
            latency_ticks: 0,
            failure_prob: 0.0,
            reward: DEFAULT_REWARD,
            contributor_count: DEFAULT_CONTRIBUTORS.min(n as usize),
            min_participation: 0,
            tick_budget: default_tick_budget(target),
            genesis: U256::zero(),
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> SimConfig {
        self.mode = mode;
        self
    }

    /// Expected attempts for one solve of the total target.
    pub fn expected_work(&self) -> Option<u64> {
        self.target.expected_work_u64()
    }

    pub fn group_count(&self) -> u64 {
        self.n / self.group_size.max(1) as u64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.group_size == 0 {
            return bad("N must be at least 1");
        }
        if self.group_size > u16::MAX as usize {
            return bad("N exceeds the 16-bit stage index");
        }
        if self.n < self.group_size as u64 {
            return bad("N exceeds n");
        }
        if self.n / self.group_size as u64 > u32::MAX as u64 {
            return bad("too many groups");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.failure_prob) {
            return bad("failure_prob must lie in [0, 1]");
        }
        if self.contributor_count == 0 || self.contributor_count as u64 > self.n {
            return bad("contributor_count must lie in 1..=n");
        }
        if self.tick_budget == 0 {
            return bad("tick_budget must be at least 1");
        }
        let Some(work) = self.expected_work() else {
            return bad("target too hard: expected work exceeds 64 bits");
        };
        // worst case: every node busy for a doubled solve or the whole budget, plus latency
        let per_round = (2 * work as u128).max(self.tick_budget as u128) + self.latency_ticks as u128;
        let worst = per_round * self.n as u128 * self.rounds as u128;
        if worst > u64::MAX as u128 {
            return bad("run too large: energy totals could overflow 64 bits");
        }
        Ok(())
    }
}

pub fn default_tick_budget(target: Target) -> u64 {
    target.expected_work_u64().map_or(u64::MAX, |w| w.saturating_mul(DEFAULT_BUDGET_FACTOR).max(1024))
}
