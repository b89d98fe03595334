//! Stable child-seed derivation so module-level re-runs match full-run logs.
//!
//! A child seed is `splitmix64(master ^ fnv1a(tag))`, folded once more per
//! extra component. Both mixers are fixed published constants, so the scheme
//! is stable across platforms and releases.

pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Child seed for a named subsystem (e.g. "env", "actor", "split").
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    splitmix64(master ^ fnv1a(tag.as_bytes()))
}

/// Fold extra numeric components (episode index, layer count, ...) into a seed.
pub fn combine(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(seed, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
