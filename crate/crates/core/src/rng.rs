//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha stream selected by a string key,
//! so adding a new consumer never shifts the numbers another one sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::physics::network::fnv1a;

pub type StreamRng = ChaCha8Rng;

/// Independent generator for `(seed, key)`.
pub fn stream_rng(seed: u64, key: &str) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(key.as_bytes()));
    rng
}

/// Derives a child seed, e.g. one per tree or per sample.
pub fn derive_seed(seed: u64, key: &str, index: u64) -> u64 {
    let mut bytes = Vec::with_capacity(key.len() + 16);
    bytes.extend_from_slice(&seed.to_le_bytes());
    bytes.extend_from_slice(key.as_bytes());
    bytes.extend_from_slice(&index.to_le_bytes());
    fnv1a(&bytes)
}
