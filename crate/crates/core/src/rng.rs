//! Seeded RNG construction.
//!
//! Every random decision in the crate flows from an explicit `u64` seed via
//! ChaCha8, so any artifact (dataset, checkpoint, report) is reproducible
//! from its config. `derive` splits one master seed into independent
//! streams keyed by a label and an index, so e.g. per-example generation and
//! per-epoch tag shuffles never share a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a sub-seed from a master seed, a purpose label and an index.
pub fn derive(seed: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over (seed, label, index); stable across platforms.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    };
    for b in seed.to_le_bytes() {
        mix(b);
    }
    for b in label.as_bytes() {
        mix(*b);
    }
    for b in index.to_le_bytes() {
        mix(b);
    }
    h
}

/// RNG for a derived stream.
pub fn substream(seed: u64, label: &str, index: u64) -> Rng {
    seeded(derive(seed, label, index))
}

/// FNV-1a hash of a byte slice; used for content fingerprints (vocab hash).
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}
