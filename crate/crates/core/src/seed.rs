//! Stable seed derivation.
//!
//! Seeds for sub-streams are derived by folding values through SplitMix64 so
//! that results do not depend on the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a sequence of 64-bit words.
pub fn mix(seed: u64, words: impl IntoIterator<Item = u64>) -> u64 {
    words
        .into_iter()
        .fold(splitmix64(seed), |h, w| splitmix64(h ^ splitmix64(w)))
}

pub fn mix_f64(seed: u64, values: &[f64]) -> u64 {
    mix(seed, values.iter().map(|v| v.to_bits()))
}

/// Derives a labelled sub-seed, e.g. `derive(run_seed, "attack")`.
pub fn derive(seed: u64, label: &str) -> u64 {
    mix(seed, label.bytes().map(u64::from))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
