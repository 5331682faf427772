//! Offline re-validation of an ndjson trace.

use std::io::BufRead;

use serde::Serialize;

use crate::beacon::{form_teams, verify_beacon, Beacon};
use crate::pow::verify_pow_proof;
use crate::protocol::{validate_chainlink, Winner, WinningProof};

use super::{busy_is_sequential, pots_proof_target, pow_proof_target, RoundRecord, SimConfig, TraceLine};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditIssue {
    /// 1-based line number.
    pub line: usize,
    pub round: Option<u64>,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    /// Round records seen, valid or not.
    pub records: usize,
    pub valid: usize,
    pub issues: Vec<AuditIssue>,
}

impl AuditReport {
    pub fn all_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks every round against the header config and the previous round's
/// beacon: beacon linkage and fold, contributor selection, team formation,
/// the busy-time shape, and both arms' winning proofs.
pub fn audit_trace(reader: impl BufRead) -> AuditReport {
    let mut report = AuditReport::default();
    let mut config: Option<SimConfig> = None;
    let mut prev: Option<Beacon> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let parsed = line
            .map_err(|e| e.to_string())
            .and_then(|l| serde_json::from_str::<TraceLine>(&l).map_err(|e| e.to_string()));
        match parsed {
            Ok(TraceLine::Header(h)) if config.is_none() && lineno == 1 => {
                prev = Some(Beacon::genesis(h.config.genesis));
                config = Some(h.config);
            }
            Ok(TraceLine::Header(_)) => report.issues.push(AuditIssue {
                line: lineno,
                round: None,
                reasons: vec!["unexpected header".into()],
            }),
            Ok(TraceLine::Round(rec)) => {
                report.records += 1;
                let reasons = match (&config, &prev) {
                    (Some(cfg), Some(p)) => check_round(cfg, p, &rec),
                    _ => vec!["missing header".into()],
                };
                prev = Some(rec.beacon.clone());
                if reasons.is_empty() {
                    report.valid += 1;
                } else {
                    report.issues.push(AuditIssue { line: lineno, round: Some(rec.round), reasons });
                }
            }
            Err(e) => {
                report.records += 1;
                report.issues.push(AuditIssue {
                    line: lineno,
                    round: None,
                    reasons: vec![format!("malformed record: {e}")],
                });
            }
        }
    }
    if config.is_none() && report.issues.is_empty() {
        report.issues.push(AuditIssue { line: 1, round: None, reasons: vec!["missing header".into()] });
    }
    report
}

fn check_round(cfg: &SimConfig, prev: &Beacon, rec: &RoundRecord) -> Vec<String> {
    let mut reasons = Vec::new();
    let k = cfg.contributor_count;
    if rec.round != rec.beacon.round {
        reasons.push("round index disagrees with beacon".into());
    }
    if let Err(f) = verify_beacon(&rec.beacon, prev, &rec.eligible, k) {
        reasons.push(format!("beacon: {f:?}"));
    }
    match form_teams(rec.beacon.round, rec.beacon.value, &rec.eligible, cfg.group_size) {
        Ok(a) if a == rec.assignment => {}
        _ => reasons.push("assignment does not match beacon".into()),
    }
    if !rec.assignment.is_partition_of(&rec.eligible) {
        reasons.push("assignment is not a partition".into());
    }
    if rec.pots_busy.len() != rec.assignment.groups.len() {
        reasons.push("busy intervals missing for some group".into());
    }
    for (g, busy) in rec.pots_busy.iter().enumerate() {
        let team = rec.assignment.groups.get(g);
        if !busy_is_sequential(busy) || !busy.iter().all(|iv| team.is_some_and(|t| t.contains(&iv.node))) {
            reasons.push(format!("group {g}: overlapping or foreign busy interval"));
        }
    }

    let pots = &rec.pots;
    if pots.proof_target != pots_proof_target(cfg) {
        reasons.push("pots: proof target differs from config".into());
    }
    match (&pots.winner, &pots.proof) {
        (Some(Winner::Group(g)), Some(WinningProof::Chain(link))) => {
            if link.group_id != *g {
                reasons.push("pots: proof is for another group".into());
            }
            if let Err(f) = validate_chainlink(link, &rec.assignment, pots.proof_target) {
                reasons.push(format!("pots: {f:?}"));
            }
        }
        (None, None) => {}
        _ => reasons.push("pots: winner and proof disagree".into()),
    }

    let pow = &rec.pow;
    if pow.proof_target != pow_proof_target(cfg) {
        reasons.push("pow: proof target differs from config".into());
    }
    match (&pow.winner, &pow.proof) {
        (Some(Winner::Node(m)), Some(WinningProof::Pow(p))) => {
            if p.miner != *m || p.round != rec.round {
                reasons.push("pow: proof is for another miner or round".into());
            }
            if let Err(f) = verify_pow_proof(p, pow.proof_target) {
                reasons.push(format!("pow: {f:?}"));
            }
        }
        (None, None) => {}
        _ => reasons.push("pow: winner and proof disagree".into()),
    }
    reasons
}
