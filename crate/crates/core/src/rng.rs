//! Counter-mode SHA-256 randomness streams.
//!
//! Block `i` of the stream for `(seed, label)` is
//! `SHA-256(seed as 8 BE bytes ‖ label ‖ i as 8 BE bytes)`. Distinct labels
//! give independent streams, so every consumer of randomness in a run gets its
//! own label and cannot perturb the others.

use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    label: Vec<u8>,
    counter: u64,
    block: [u8; 32],
    offset: usize,
}

pub fn derive_rng_stream(seed: u64, label: &[u8]) -> RngStream {
    RngStream { seed, label: label.to_vec(), counter: 0, block: [0; 32], offset: 32 }
}

impl RngStream {
    /// Block `index` of this stream, independent of the read position.
    pub fn block(&self, index: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.seed.to_be_bytes());
        h.update(&self.label);
        h.update(index.to_be_bytes());
        h.finalize().into()
    }

    pub fn label(&self) -> &[u8] {
        &self.label
    }

    /// Next 8 bytes of the stream, big-endian.
    pub fn next_u64(&mut self) -> u64 {
        if self.offset == 32 {
            self.block = self.block(self.counter);
            self.counter += 1;
            self.offset = 0;
        }
        let mut word = [0u8; 8];
        word.copy_from_slice(&self.block[self.offset..self.offset + 8]);
        self.offset += 8;
        u64::from_be_bytes(word)
    }

    /// Uniform integer in `0..bound`, by rejection of the biased low zone.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        // 2^64 mod bound
        let zone = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= zone {
                return x % bound;
            }
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p` (clamped to `[0, 1]`).
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit_f64() < p
    }
}
