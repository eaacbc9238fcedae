//! Seed derivation for reproducible, parallel-safe sampling.

/// Derives an independent child seed from a base seed, a stage tag, and an
/// index, via a splitmix64-style mix. Same inputs always give the same seed.
pub fn derive_seed(base: u64, domain: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(domain.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stage tags used by the pipeline so per-stage streams never collide.
pub mod domains {
    pub const WALK: u64 = 1;
    pub const WEIGHTED: u64 = 2;
    pub const MINE: u64 = 3;
    pub const EVOLVE: u64 = 4;
    pub const DEMOS: u64 = 5;
    pub const SIZE: u64 = 6;
    pub const BASE_PICK: u64 = 7;
}

/// Stable 64-bit FNV-1a hash, used for config hashes and result digests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
