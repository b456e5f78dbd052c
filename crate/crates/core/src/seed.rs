//! Seed derivation for per-entity random streams.

/// Mixes a base seed with a string key (FNV-1a over the key, then a
/// multiplicative mix of the seed).
pub fn mix(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}
