//! Deterministic seeding.
//!
//! Every stochastic routine takes an explicit `u64` seed and builds its own
//! [`ChaCha8Rng`] from it. Replication seeds are derived from a master seed,
//! the replication index and a task tag through a splitmix64 chain, so the
//! stream consumed by a replication never depends on which worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Recorded verbatim in every result manifest.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng (rand_chacha 0.9, seed_from_u64); replication seed = splitmix64(splitmix64(master ^ fnv1a64(tag)) + index)";

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a64(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Seed for replication `index` of the work stream named `tag`.
///
/// For a fixed `(master, tag)` this is injective in `index` because
/// splitmix64 is a bijection on `u64`.
pub fn replication_seed(master: u64, index: u64, tag: &str) -> u64 {
    let base = splitmix64(master ^ fnv1a64(tag));
    splitmix64(base.wrapping_add(index))
}

/// Seed for a one-off auxiliary draw (loadings, reference ensembles).
pub fn derived_seed(master: u64, tag: &str) -> u64 {
    splitmix64(splitmix64(master) ^ fnv1a64(tag))
}
