//! Per-node reward accounting, generic over the reward scalar.
//!
//! Integer units split a reward into equal quotients and hand the remainder,
//! one unit each, to the first team positions, so every split conserves the
//! total exactly. Rationals split exactly. Floats split by plain division.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::Add;

use num_rational::Ratio;
use num_traits::{FromPrimitive, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::beacon::NodeId;

pub trait RewardUnit: Clone + Debug + PartialOrd + Zero + Add<Output = Self> {
    /// `parts` shares of `total`, in team-position order.
    fn split(total: &Self, parts: usize) -> Vec<Self>;

    fn to_f64(&self) -> f64;
}

macro_rules! impl_integer_unit {
    ($($t:ty),*) => {$(
        impl RewardUnit for $t {
            fn split(total: &Self, parts: usize) -> Vec<Self> {
                assert!(parts > 0, "cannot split among zero members");
                let n = parts as $t;
                let (q, r) = (total / n, total % n);
                (0..n).map(|i| if i < r { q + 1 } else { q }).collect()
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    )*};
}

impl_integer_unit!(u32, u64, u128);

macro_rules! impl_float_unit {
    ($($t:ty),*) => {$(
        impl RewardUnit for $t {
            fn split(total: &Self, parts: usize) -> Vec<Self> {
                assert!(parts > 0, "cannot split among zero members");
                vec![*total / parts as $t; parts]
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    )*};
}

impl_float_unit!(f32, f64);

impl<T> RewardUnit for Ratio<T>
where
    T: Clone + Debug + num_integer::Integer + FromPrimitive + ToPrimitive,
{
    fn split(total: &Self, parts: usize) -> Vec<Self> {
        assert!(parts > 0, "cannot split among zero members");
        let n = T::from_usize(parts).expect("team size fits the ratio's integer type");
        vec![total.clone() / Ratio::from_integer(n); parts]
    }

    fn to_f64(&self) -> f64 {
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(a), Some(b)) => a / b,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLedger<S> {
    pub cumulative: BTreeMap<NodeId, S>,
    pub reward_per_round: S,
}

impl<S: RewardUnit> RewardLedger<S> {
    pub fn new(reward_per_round: S) -> Self {
        RewardLedger { cumulative: BTreeMap::new(), reward_per_round }
    }

    /// Zero balances for `nodes`, so nodes that never win still appear.
    pub fn with_nodes(reward_per_round: S, nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let cumulative = nodes.into_iter().map(|n| (n, S::zero())).collect();
        RewardLedger { cumulative, reward_per_round }
    }

    pub fn balance(&self, node: NodeId) -> S {
        self.cumulative.get(&node).cloned().unwrap_or_else(S::zero)
    }

    pub fn total(&self) -> S {
        self.cumulative.values().cloned().fold(S::zero(), |a, b| a + b)
    }

    /// Credits one round's reward to the winning team.
    pub fn credit(&mut self, winning_team: &[NodeId]) {
        let reward = self.reward_per_round.clone();
        self.add_split(winning_team, &reward);
    }

    fn add_split(&mut self, team: &[NodeId], reward: &S) {
        for (node, share) in team.iter().zip(S::split(reward, team.len())) {
            let slot = self.cumulative.entry(*node).or_insert_with(S::zero);
            *slot = slot.clone() + share;
        }
    }
}

/// Splits `reward` equally across `winning_team` and adds the shares to
/// `ledger`.
pub fn distribute_rewards<S: RewardUnit>(
    mut ledger: RewardLedger<S>,
    winning_team: &[NodeId],
    reward: S,
) -> RewardLedger<S> {
    assert!(!winning_team.is_empty(), "winning team must not be empty");
    ledger.add_split(winning_team, &reward);
    ledger
}
