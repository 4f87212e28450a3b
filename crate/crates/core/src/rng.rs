//! Seed plumbing. Every random stream in a run is derived from one run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Sub-seed for a named stage: `seed + fnv1a(tag)` (wrapping).
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    seed.wrapping_add(fnv1a(tag.as_bytes()))
}

/// Sub-seed for a named stage at a given counter (epoch, cycle, ...).
pub fn derive_indexed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut buf = [0u8; 8];
    buf.copy_from_slice(&index.to_le_bytes());
    derive_seed(seed, tag) ^ fnv1a(&buf).rotate_left(17)
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fingerprint of a sequence of floats, bitwise.
pub fn hash_f64s<'a>(chunks: impl IntoIterator<Item = &'a [f64]>) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for chunk in chunks {
        for v in chunk {
            for b in v.to_bits().to_le_bytes() {
                hash ^= u64::from(b);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    hash
}
