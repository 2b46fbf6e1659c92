use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives an independent, reproducible RNG stream from a base seed and a
/// phase label plus counters. Streams must not depend on call order so that
/// interrupted runs resume on identical randomness.
pub fn stream(seed: u64, phase: &str, counters: &[u64]) -> ChaCha8Rng {
    let mut h = fnv1a64(phase.as_bytes());
    h ^= seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &c in counters {
        h = fnv1a64_u64(h, c);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// FNV-1a over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn fnv1a64_u64(mut h: u64, v: u64) -> u64 {
    for b in v.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// FNV-1a over the little-endian bit patterns of a float slice.
pub fn fnv1a64_f64(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        h = fnv1a64_u64(h, v.to_bits());
    }
    h
}
