//! Seeded random streams.
//!
//! Every random draw in the pipeline comes from a [`ChaCha8Rng`] whose seed is
//! derived from one top-level seed and a stream name:
//! `seed_for(root, name) = first 8 bytes (LE) of SHA-256(root as LE u64 || name)`.
//! ChaCha8 output is specified bit-for-bit, so streams are identical on every
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn seed_for(root: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Independent generator for the named stream under `root`.
pub fn stream(root: u64, name: &str) -> Rng {
    ChaCha8Rng::seed_from_u64(seed_for(root, name))
}
