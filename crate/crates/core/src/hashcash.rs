//! Hash-puzzle engine: SHA-256 digests, numeric targets and sequential nonce
//! search.

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::word::U256;

/// SHA-256 of `preimage`, read as a big-endian integer.
pub fn digest(preimage: &[u8]) -> U256 {
    let out: [u8; 32] = Sha256::digest(preimage).into();
    U256::from_be_bytes(&out)
}

/// SHA-256 over several byte slices, concatenated.
pub(crate) fn digest_parts(parts: &[&[u8]]) -> U256 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let out: [u8; 32] = h.finalize().into();
    U256::from_be_bytes(&out)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TargetError {
    #[error("target threshold must be at least 1")]
    Zero,
    #[error("target exponent {0} out of range 0..=256")]
    Exponent(u32),
}

/// A digest succeeds iff it is strictly below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Target {
    threshold: U256,
}

impl Target {
    pub fn new(threshold: U256) -> Result<Target, TargetError> {
        if threshold.is_zero() {
            return Err(TargetError::Zero);
        }
        Ok(Target { threshold })
    }

    /// `2^exp`; an exponent of 256 saturates to `2^256 - 1`.
    pub fn from_exponent(exp: u32) -> Result<Target, TargetError> {
        match exp {
            0..=255 => Ok(Target { threshold: U256::pow2(exp) }),
            256 => Ok(Target::easiest()),
            _ => Err(TargetError::Exponent(exp)),
        }
    }

    /// Threshold `2^256 - 1`: every digest but the all-ones value succeeds.
    pub fn easiest() -> Target {
        Target { threshold: U256::MAX }
    }

    pub fn threshold(&self) -> U256 {
        self.threshold
    }

    /// Success probability of one attempt, `threshold / 2^256`.
    pub fn probability(&self) -> f64 {
        self.threshold.to_f64_lossy() / 2f64.powi(256)
    }

    /// Expected attempts for one solve, `round(2^256 / threshold)`,
    /// saturating at `2^256 - 1` for a threshold of one.
    pub fn expected_work(&self) -> U256 {
        // 2^256 = q*t + r + 1 with (q, r) = divmod(2^256 - 1, t)
        let t = self.threshold;
        let (q, r) = U256::MAX.div_mod(t);
        let frac_num = r + U256::one(); // in 1..=t
        if frac_num == t {
            return q.saturating_add(U256::one());
        }
        // round half up: frac_num / t >= 1/2
        if frac_num >= t - frac_num {
            q + U256::one()
        } else {
            q
        }
    }

    /// `expected_work` if it fits in 64 bits.
    pub fn expected_work_u64(&self) -> Option<u64> {
        let w = self.expected_work();
        (w.bits() <= 64).then(|| w.low_u64())
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.threshold.to_hex())
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Target, D::Error> {
        let s = String::deserialize(d)?;
        let t = U256::from_hex(&s).map_err(de::Error::custom)?;
        Target::new(t).map_err(de::Error::custom)
    }
}

pub fn meets_target(d: U256, t: Target) -> bool {
    d < t.threshold
}

/// Per-stage target for a team of `group_size`: the total threshold scaled
/// by the group size, saturating at `2^256 - 1`. `group_size` stages at this
/// target cost one solve of `total` in expectation.
pub fn stage_target(total: Target, group_size: usize) -> Target {
    assert!(group_size >= 1, "group size must be at least 1");
    let threshold = total.threshold.saturating_mul(U256::from(group_size as u64));
    Target { threshold }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchOutcome {
    Found { nonce: u64, digest: U256, attempts: u64 },
    Exhausted { attempts: u64 },
}

impl SearchOutcome {
    pub fn attempts(&self) -> u64 {
        match *self {
            SearchOutcome::Found { attempts, .. } | SearchOutcome::Exhausted { attempts } => attempts,
        }
    }
}

/// Incremental sequential search: one nonce per [`NonceSearch::step`].
///
/// Nonces are appended to the prefix as 8 big-endian bytes.
#[derive(Debug, Clone)]
pub struct NonceSearch {
    prefix: Sha256,
    target: Target,
    next_nonce: Option<u64>,
    attempts: u64,
}

impl NonceSearch {
    pub fn new(prefix: &[u8], target: Target, start_nonce: u64) -> NonceSearch {
        let mut h = Sha256::new();
        h.update(prefix);
        NonceSearch { prefix: h, target, next_nonce: Some(start_nonce), attempts: 0 }
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    /// Whether the nonce space is used up.
    pub fn is_spent(&self) -> bool {
        self.next_nonce.is_none()
    }

    /// Evaluates the next nonce. Returns `Some((nonce, digest))` on success;
    /// `None` on a miss or when the nonce space is spent.
    pub fn step(&mut self) -> Option<(u64, U256)> {
        let nonce = self.next_nonce?;
        let mut h = self.prefix.clone();
        h.update(nonce.to_be_bytes());
        let out: [u8; 32] = h.finalize().into();
        let d = U256::from_be_bytes(&out);
        self.attempts += 1;
        self.next_nonce = nonce.checked_add(1);
        meets_target(d, self.target).then_some((nonce, d))
    }
}

/// Bounded sequential search from `start_nonce`.
pub fn search(prefix: &[u8], t: Target, start_nonce: u64, max_attempts: u64) -> SearchOutcome {
    assert!(max_attempts >= 1, "max_attempts must be at least 1");
    let mut s = NonceSearch::new(prefix, t, start_nonce);
    while s.attempts() < max_attempts && !s.is_spent() {
        if let Some((nonce, digest)) = s.step() {
            return SearchOutcome::Found { nonce, digest, attempts: s.attempts() };
        }
    }
    SearchOutcome::Exhausted { attempts: s.attempts() }
}

/// Recomputes `digest(prefix ‖ nonce)`.
pub fn nonce_digest(prefix: &[u8], nonce: u64) -> U256 {
    digest_parts(&[prefix, &nonce.to_be_bytes()])
}
