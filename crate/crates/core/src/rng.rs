//! Seed derivation. Every random stream is a ChaCha8 generator keyed by a
//! master seed and a named purpose, so runs are reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Independent generator for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: &str, index: u64) -> Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((purpose.len() as u64).to_le_bytes());
    h.update(purpose.as_bytes());
    h.update(index.to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(key)
}

/// Derives a child seed, e.g. one per experiment trial.
pub fn child_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, purpose, index).next_u64()
}

/// Deterministic uniform in [0, 1) from a seed and a list of byte strings.
pub fn unit_hash(seed: u64, parts: &[&[u8]]) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    (u64::from_le_bytes(b) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
