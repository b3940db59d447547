//! Child-seed derivation.
//!
//! A child seed is the first eight bytes (little endian) of
//! `SHA-256(master_le || tag || 0x00 || idx_0_le || idx_1_le || ...)`.
//! The result depends only on its inputs, never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive(master: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    h.update([0u8]);
    for i in indices {
        h.update(i.to_le_bytes());
    }
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

/// The random stream used everywhere in the crate.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
