//! Labelled random streams derived from a single run seed.
//!
//! Every consumer of randomness (environment, acting, replay sampling,
//! target draws, actor noise, initialization) gets its own ChaCha stream so
//! that adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// FNV-1a over the label, mixed with the seed through splitmix64.
fn mix(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stream for `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, label))
}

/// Derive a child seed, e.g. for per-episode environment resets.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    mix(seed, label)
}
