//! Team-sprint collaborative proof-of-work.
//!
//! Teams of `N` nodes solve `N` chained hash puzzles, each stage consuming the
//! previous stage's digest, and the first team to finish shares the block
//! reward. A per-round XOR beacon picks who contributes randomness and how
//! teams are formed. Alongside the protocol core this crate carries a
//! deterministic simulator that races the team arm against a plain
//! proof-of-work arm and accounts energy as hash attempts.
//!
//! Modules, bottom-up:
//!
//! - [`word`]: 256-bit integers and their hex form.
//! - [`hashcash`]: digests, targets and nonce search.
//! - [`beacon`]: beacon chaining, contributor selection, team formation.
//! - [`protocol`]: the team chain, validation, winners.
//! - [`reward`]: reward ledgers, generic over the reward scalar.
//! - [`pow`]: the proof-of-work baseline.
//! - [`rng`]: counter-mode SHA-256 randomness streams.
//! - [`simnet`]: round orchestration, traces, summaries and trace audits.
//! - [`stats`]: chi-square and small numeric helpers.

pub mod beacon;
pub mod hashcash;
pub mod pow;
pub mod protocol;
pub mod reward;
pub mod rng;
pub mod simnet;
pub mod stats;
pub mod word;

pub use beacon::{Beacon, NodeId, TeamAssignment};
pub use hashcash::Target;
pub use pow::{Mode, PowProof};
pub use protocol::{ChainLink, RoundResult, StageProof};
pub use reward::{RewardLedger, RewardUnit};
pub use simnet::{run_experiment, ExperimentSummary, SimConfig, Simulation};
pub use word::U256;

/// Rewards in integer micro-units; splits hand remainders to leading
/// positions.
pub type MicroRewardLedger = RewardLedger<u64>;
/// Rewards as exact fractions of the block reward.
pub type ExactRewardLedger = RewardLedger<num_rational::Ratio<u64>>;
pub type FloatRewardLedger = RewardLedger<f64>;
pub type Float32RewardLedger = RewardLedger<f32>;
