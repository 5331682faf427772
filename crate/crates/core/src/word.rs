//! 256-bit words: digests, beacon values and target thresholds.
//!
//! Every word is big-endian on the wire and serializes as exactly 64 lowercase
//! hex digits.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serializer};

// the macro's generated code trips a clippy lint
#[allow(clippy::manual_div_ceil)]
mod inner {
    uint::construct_uint! {
        /// Unsigned 256-bit integer.
        pub struct U256(4);
    }
}
pub use inner::U256;

impl U256 {
    /// `2^exp`, for `exp < 256`.
    pub fn pow2(exp: u32) -> U256 {
        assert!(exp < 256, "2^{exp} does not fit in 256 bits");
        U256::one() << exp as usize
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        self.to_big_endian()
    }

    pub fn from_be_bytes(bytes: &[u8; 32]) -> U256 {
        U256::from_big_endian(bytes)
    }

    /// Fixed-width lowercase hex, 64 digits.
    pub fn to_hex(&self) -> String {
        let bytes = self.to_be_bytes();
        let mut out = String::with_capacity(64);
        for b in bytes {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    /// Parses exactly 64 hex digits (either case).
    pub fn from_hex(s: &str) -> Result<U256, HexError> {
        if s.len() != 64 {
            return Err(HexError::Length(s.len()));
        }
        if !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(HexError::Digit);
        }
        U256::from_str_radix(s, 16).map_err(|_| HexError::Digit)
    }

    /// Nearest `f64`; loses precision beyond 53 significant bits.
    pub fn to_f64_lossy(&self) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &limb| acc * 18_446_744_073_709_551_616.0 + limb as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("expected 64 hex digits, got {0}")]
    Length(usize),
    #[error("invalid hex digit")]
    Digit,
}

/// Display adapter printing the fixed-width hex form.
pub struct Hex<'a>(pub &'a U256);

impl fmt::Display for Hex<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_hex())
    }
}

/// `#[serde(with = "hex256")]` for a single word.
pub mod hex256 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &U256, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_hex())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<U256, D::Error> {
        let s = String::deserialize(d)?;
        U256::from_hex(&s).map_err(de::Error::custom)
    }
}

/// `#[serde(with = "hex256_vec")]` for a list of words.
pub mod hex256_vec {
    use serde::ser::SerializeSeq;

    use super::*;

    pub fn serialize<S: Serializer>(v: &[U256], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for w in v {
            seq.serialize_element(&w.to_hex())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<U256>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| U256::from_hex(s).map_err(de::Error::custom)).collect()
    }
}
