//! Seed-derived random streams.
//!
//! Every consumer of randomness asks for a stream keyed by
//! `(master seed, purpose tag, index)`. Streams are independent ChaCha8
//! generators, so a dataset example, a weight matrix, or a clustering run
//! always sees the same bits no matter what else ran before it or on how
//! many threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche, used only for key derivation.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a, stable across platforms.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// A deterministic generator for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    let key = mix(seed ^ mix(tag_hash(tag)) ^ mix(index.wrapping_mul(0x9e3779b97f4a7c15)));
    ChaCha8Rng::seed_from_u64(key)
}
