//! Round randomness: the chained XOR beacon, contributor selection and team
//! formation.
//!
//! Both selection and team formation rank nodes by
//! `SHA-256(value as 32 BE bytes ‖ node id as 8 BE bytes)`, ascending, with
//! the node id breaking (astronomically unlikely) digest ties. Contributors
//! are the `k` lowest-ranked nodes against the previous beacon value; teams
//! are consecutive chunks of the ranking against the new value.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::hashcash::digest_parts;
use crate::word::{hex256, hex256_vec, U256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

// JSON map keys are strings, and buffered (tagged) deserialization does not
// coerce them back to integers, so accept both forms.
impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = NodeId;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a node id")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<NodeId, E> {
                Ok(NodeId(v))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<NodeId, E> {
                u64::try_from(v).map(NodeId).map_err(|_| E::custom("negative node id"))
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<NodeId, E> {
                v.parse().map(NodeId).map_err(|_| E::custom(format!("bad node id {v:?}")))
            }
        }
        d.deserialize_any(V)
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BeaconError {
    #[error("no contributions to combine")]
    EmptyContributions,
    #[error("requested {requested} nodes but only {available} are eligible")]
    InsufficientNodes { requested: usize, available: usize },
    #[error("node {0} was not selected to contribute")]
    UnauthorizedContributor(NodeId),
    #[error("node {0} contributed twice")]
    DuplicateContributor(NodeId),
    #[error("selected node {0} did not contribute")]
    MissingContributor(NodeId),
    #[error("group size must be at least 1")]
    InvalidGroupSize,
    #[error("node {0} listed twice in the eligible set")]
    DuplicateNode(NodeId),
    #[error("no eligible nodes")]
    NoEligibleNodes,
}

/// Why a beacon failed verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeaconFault {
    BadLinkage,
    BadFold,
    BadContributorSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Beacon {
    pub round: u64,
    #[serde(with = "hex256")]
    pub value: U256,
    pub contributors: Vec<NodeId>,
    #[serde(with = "hex256_vec")]
    pub contributions: Vec<U256>,
    #[serde(with = "hex256")]
    pub prev_value: U256,
}

impl Beacon {
    pub fn genesis(seed_value: U256) -> Beacon {
        Beacon {
            round: 0,
            value: seed_value,
            contributors: Vec::new(),
            contributions: Vec::new(),
            prev_value: U256::zero(),
        }
    }
}

pub fn xor_combine(contributions: &[U256]) -> Result<U256, BeaconError> {
    let (first, rest) = contributions.split_first().ok_or(BeaconError::EmptyContributions)?;
    Ok(rest.iter().fold(*first, |acc, c| acc ^ *c))
}

pub fn ranking_key(beacon_value: U256, node: NodeId) -> U256 {
    digest_parts(&[&beacon_value.to_be_bytes(), &node.0.to_be_bytes()])
}

fn ensure_distinct(nodes: &[NodeId]) -> Result<(), BeaconError> {
    let mut seen = BTreeSet::new();
    match nodes.iter().find(|n| !seen.insert(**n)) {
        Some(dup) => Err(BeaconError::DuplicateNode(*dup)),
        None => Ok(()),
    }
}

/// Sorts `nodes` by ranking key against `beacon_value`.
pub fn rank_nodes(beacon_value: U256, nodes: &[NodeId]) -> Vec<NodeId> {
    let mut keyed: Vec<(U256, NodeId)> = nodes.iter().map(|&n| (ranking_key(beacon_value, n), n)).collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, n)| n).collect()
}

/// The `k` eligible nodes with the smallest ranking keys, in ranking order.
pub fn select_contributors(
    beacon_value: U256,
    eligible: &[NodeId],
    k: usize,
) -> Result<Vec<NodeId>, BeaconError> {
    if k > eligible.len() {
        return Err(BeaconError::InsufficientNodes { requested: k, available: eligible.len() });
    }
    ensure_distinct(eligible)?;
    let mut ranked = rank_nodes(beacon_value, eligible);
    ranked.truncate(k);
    Ok(ranked)
}

/// Builds the next beacon from the selected nodes' contributions.
///
/// `contributions` may arrive in any order; they are stored in the selection
/// order so the beacon has a canonical form.
pub fn advance_beacon(
    prev: &Beacon,
    contributions: &[(NodeId, U256)],
    eligible: &[NodeId],
    k: usize,
) -> Result<Beacon, BeaconError> {
    let selected = select_contributors(prev.value, eligible, k)?;
    let mut by_node: BTreeMap<NodeId, U256> = BTreeMap::new();
    for &(node, c) in contributions {
        if !selected.contains(&node) {
            return Err(BeaconError::UnauthorizedContributor(node));
        }
        if by_node.insert(node, c).is_some() {
            return Err(BeaconError::DuplicateContributor(node));
        }
    }
    let mut ordered = Vec::with_capacity(selected.len());
    for node in &selected {
        ordered.push(*by_node.get(node).ok_or(BeaconError::MissingContributor(*node))?);
    }
    let value = xor_combine(&ordered)?;
    Ok(Beacon {
        round: prev.round + 1,
        value,
        contributors: selected,
        contributions: ordered,
        prev_value: prev.value,
    })
}

/// Checks linkage to `prev`, the XOR fold, and that the contributors are
/// exactly `select_contributors(prev.value, eligible, k)`.
pub fn verify_beacon(b: &Beacon, prev: &Beacon, eligible: &[NodeId], k: usize) -> Result<(), BeaconFault> {
    if b.prev_value != prev.value || prev.round.checked_add(1) != Some(b.round) {
        return Err(BeaconFault::BadLinkage);
    }
    if b.contributions.len() != b.contributors.len() {
        return Err(BeaconFault::BadFold);
    }
    match xor_combine(&b.contributions) {
        Ok(v) if v == b.value => {}
        _ => return Err(BeaconFault::BadFold),
    }
    match select_contributors(prev.value, eligible, k) {
        Ok(selected) if selected == b.contributors => Ok(()),
        _ => Err(BeaconFault::BadContributorSet),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityRecord {
    pub node: NodeId,
    pub rounds_participated: u64,
    pub online: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityPolicy {
    pub min_participation: u64,
}

impl EligibilityPolicy {
    pub fn admits(&self, r: &EligibilityRecord) -> bool {
        r.online && r.rounds_participated >= self.min_participation
    }
}

/// Participation records for every known node.
#[derive(Debug, Clone)]
pub struct EligibilityRegistry {
    policy: EligibilityPolicy,
    records: BTreeMap<NodeId, EligibilityRecord>,
}

impl EligibilityRegistry {
    pub fn new(policy: EligibilityPolicy) -> EligibilityRegistry {
        EligibilityRegistry { policy, records: BTreeMap::new() }
    }

    /// Registers (or replaces) a node with some prior participation.
    pub fn register(&mut self, node: NodeId, rounds_participated: u64) {
        self.records.insert(node, EligibilityRecord { node, rounds_participated, online: true });
    }

    pub fn set_online(&mut self, node: NodeId, online: bool) {
        if let Some(r) = self.records.get_mut(&node) {
            r.online = online;
        }
    }

    pub fn record(&self, node: NodeId) -> Option<&EligibilityRecord> {
        self.records.get(&node)
    }

    /// Eligible nodes in id order.
    pub fn eligible(&self) -> Vec<NodeId> {
        self.records.values().filter(|r| self.policy.admits(r)).map(|r| r.node).collect()
    }

    /// Credits every grouped node of `assignment` with one round.
    pub fn record_assignment(&mut self, assignment: &TeamAssignment) {
        for node in assignment.groups.iter().flatten() {
            if let Some(r) = self.records.get_mut(node) {
                r.rounds_participated += 1;
            }
        }
    }
}

/// Partition of one round's eligible nodes into equal groups plus a bench.
/// Position `k` of a group runs stage `k + 1` of that group's chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamAssignment {
    pub round: u64,
    #[serde(with = "hex256")]
    pub beacon_value: U256,
    pub group_size: usize,
    pub groups: Vec<Vec<NodeId>>,
    pub benched: Vec<NodeId>,
}

impl TeamAssignment {
    pub fn group(&self, id: u32) -> Option<&[NodeId]> {
        self.groups.get(id as usize).map(Vec::as_slice)
    }

    /// Every node of `eligible` sits in exactly one group or on the bench,
    /// and groups are full.
    pub fn is_partition_of(&self, eligible: &[NodeId]) -> bool {
        if self.group_size == 0 || self.groups.iter().any(|g| g.len() != self.group_size) {
            return false;
        }
        let mut placed: Vec<NodeId> = self.groups.iter().flatten().chain(&self.benched).copied().collect();
        let mut expect = eligible.to_vec();
        placed.sort_unstable();
        expect.sort_unstable();
        placed == expect
            && self.groups.len() == eligible.len() / self.group_size
            && self.benched.len() == eligible.len() % self.group_size
    }
}

pub fn form_teams(
    round: u64,
    beacon_value: U256,
    eligible: &[NodeId],
    group_size: usize,
) -> Result<TeamAssignment, BeaconError> {
    if group_size == 0 {
        return Err(BeaconError::InvalidGroupSize);
    }
    if eligible.is_empty() {
        return Err(BeaconError::NoEligibleNodes);
    }
    ensure_distinct(eligible)?;
    let ranked = rank_nodes(beacon_value, eligible);
    let cut = ranked.len() - ranked.len() % group_size;
    let groups = ranked[..cut].chunks(group_size).map(<[NodeId]>::to_vec).collect();
    Ok(TeamAssignment { round, beacon_value, group_size, groups, benched: ranked[cut..].to_vec() })
}
