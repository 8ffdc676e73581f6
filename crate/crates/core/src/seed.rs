//! Stable seed derivation.
//!
//! One master seed fans out into per-stage and per-item seeds through a fixed
//! mixing function, so any single item can be regenerated in isolation and
//! results never depend on worker count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used for every seeded draw in the toolkit.
pub type ItemRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over bytes; stable across platforms and releases.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Combine a parent seed with a numeric child index.
#[inline]
pub fn derive(parent: u64, child: u64) -> u64 {
    mix64(parent ^ mix64(child))
}

/// Combine a parent seed with a textual label (stage name, item id).
#[inline]
pub fn derive_str(parent: u64, label: &str) -> u64 {
    derive(parent, hash_str(label))
}

pub fn rng(seed: u64) -> ItemRng {
    ChaCha8Rng::seed_from_u64(seed)
}
