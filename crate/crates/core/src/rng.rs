//! Keyed random streams. Every random quantity is addressed by a seed plus a
//! small tuple of counters, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream `index` of the generator seeded by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive a child seed from a parent seed and a label (SplitMix64 finalizer chain).
pub fn derive_seed(seed: u64, label: &[u64]) -> u64 {
    let mut h = mix(seed ^ 0x6a09_e667_f3bc_c908);
    for &x in label {
        h = mix(h ^ mix(x.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

/// Stable hash of a string label, for keying streams by names.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
