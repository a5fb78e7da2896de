//! Seed plumbing.
//!
//! Every stochastic stage derives its own stream from a single 64-bit root
//! seed and a label, so one seed pins the entire pipeline. ChaCha8 keeps the
//! streams stable across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a subsystem seed from the root seed and a label.
///
/// The same (root, label) always yields the same seed; distinct labels give
/// independent streams.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = splitmix64(root ^ 0x5851_F42D_4C95_7F2D);
    for &b in label.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

/// Seeded RNG for a labeled subsystem.
pub fn rng_for(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}

/// Seeded RNG for a labeled, indexed stream (e.g. one per trial).
pub fn rng_for_indexed(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(derive_seed(root, label) ^ index))
}
