//! Trace records and the summaries derived from them.
//!
//! A trace is newline-delimited JSON: one header line carrying the full
//! config, then one line per round.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::beacon::{Beacon, NodeId, TeamAssignment};
use crate::protocol::{BusyInterval, Protocol, RoundResult, Winner};
use crate::MicroRewardLedger;

use super::SimConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceLine {
    Header(TraceHeader),
    Round(Box<RoundRecord>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: u32,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub schema: u32,
    pub round: u64,
    pub eligible: Vec<NodeId>,
    pub beacon: Beacon,
    pub assignment: TeamAssignment,
    pub pots: RoundResult,
    /// Busy intervals per group, in group order.
    pub pots_busy: Vec<Vec<BusyInterval>>,
    pub pow: RoundResult,
}

/// Cumulative hash attempts per node; one attempt is one energy unit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub attempts: BTreeMap<NodeId, u64>,
}

impl EnergyLedger {
    pub fn with_nodes(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        EnergyLedger { attempts: nodes.into_iter().map(|n| (n, 0)).collect() }
    }

    pub fn charge(&mut self, round: &BTreeMap<NodeId, u64>) {
        for (node, a) in round {
            *self.attempts.entry(*node).or_insert(0) += a;
        }
    }

    pub fn total(&self) -> u64 {
        self.attempts.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub protocol: Protocol,
    pub total_energy: u64,
    pub rounds_completed: u64,
    pub incomplete_rounds: u64,
    /// Over completed rounds; zero when none completed.
    pub mean_duration_ticks: f64,
    pub attempts: BTreeMap<NodeId, u64>,
    /// Cumulative reward in micro-units.
    pub rewards: BTreeMap<NodeId, u64>,
}

impl ArmSummary {
    pub fn reward_min(&self) -> u64 {
        self.rewards.values().copied().min().unwrap_or(0)
    }

    pub fn reward_max(&self) -> u64 {
        self.rewards.values().copied().max().unwrap_or(0)
    }

    pub fn reward_mean(&self) -> f64 {
        if self.rewards.is_empty() {
            return 0.0;
        }
        self.rewards.values().map(|&r| r as f64).sum::<f64>() / self.rewards.len() as f64
    }

    pub fn reward_total(&self) -> u64 {
        self.rewards.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema: u32,
    pub config: SimConfig,
    pub pots: ArmSummary,
    pub pow: ArmSummary,
    /// PoTS energy over PoW energy; absent when PoW spent nothing.
    pub energy_ratio: Option<f64>,
}

impl ExperimentSummary {
    pub fn arm(&self, p: Protocol) -> &ArmSummary {
        match p {
            Protocol::Pots => &self.pots,
            Protocol::Pow => &self.pow,
        }
    }
}

#[derive(Debug, Clone)]
struct ArmTally {
    protocol: Protocol,
    energy: EnergyLedger,
    rewards: MicroRewardLedger,
    completed: u64,
    incomplete: u64,
    duration_sum: u128,
}

impl ArmTally {
    fn new(protocol: Protocol, cfg: &SimConfig) -> Self {
        let nodes = (0..cfg.n).map(NodeId);
        ArmTally {
            protocol,
            energy: EnergyLedger::with_nodes(nodes.clone()),
            rewards: MicroRewardLedger::with_nodes(cfg.reward, nodes),
            completed: 0,
            incomplete: 0,
            duration_sum: 0,
        }
    }

    fn add(&mut self, r: &RoundResult, winning_team: Option<&[NodeId]>) {
        self.energy.charge(&r.attempts_by_node);
        match winning_team {
            Some(team) => {
                self.completed += 1;
                self.duration_sum += r.duration_ticks as u128;
                self.rewards.credit(team);
            }
            None => self.incomplete += 1,
        }
    }

    fn finish(&self) -> ArmSummary {
        let mean = if self.completed == 0 { 0.0 } else { self.duration_sum as f64 / self.completed as f64 };
        ArmSummary {
            protocol: self.protocol,
            total_energy: self.energy.total(),
            rounds_completed: self.completed,
            incomplete_rounds: self.incomplete,
            mean_duration_ticks: mean,
            attempts: self.energy.attempts.clone(),
            rewards: self.rewards.cumulative.clone(),
        }
    }
}

/// Folds round records into an [`ExperimentSummary`]. The simulator and the
/// offline `summarize` path share this, so a summary is always recomputable
/// from its trace.
#[derive(Debug, Clone)]
pub struct SummaryBuilder {
    config: SimConfig,
    pots: ArmTally,
    pow: ArmTally,
}

impl SummaryBuilder {
    pub fn new(config: SimConfig) -> Self {
        SummaryBuilder {
            pots: ArmTally::new(Protocol::Pots, &config),
            pow: ArmTally::new(Protocol::Pow, &config),
            config,
        }
    }

    pub fn add(&mut self, rec: &RoundRecord) {
        let pots_team = match rec.pots.winner {
            Some(Winner::Group(g)) => rec.assignment.group(g),
            _ => None,
        };
        self.pots.add(&rec.pots, pots_team);
        let pow_team = match &rec.pow.winner {
            Some(Winner::Node(m)) => Some(std::slice::from_ref(m)),
            _ => None,
        };
        self.pow.add(&rec.pow, pow_team);
    }

    pub fn finish(&self) -> ExperimentSummary {
        let pots = self.pots.finish();
        let pow = self.pow.finish();
        let energy_ratio = (pow.total_energy > 0).then(|| pots.total_energy as f64 / pow.total_energy as f64);
        ExperimentSummary { schema: SCHEMA_VERSION, config: self.config.clone(), pots, pow, energy_ratio }
    }
}
