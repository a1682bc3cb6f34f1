//! Deterministic seeding.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed from a
//! single 64-bit master seed. Stream seeds are derived with SplitMix64
//! mixing over (master seed, stream label, extra), so independent
//! subsystems never share a stream and runs are bit-reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels for seed derivation. The numeric values are part of the
/// reproducibility contract: changing them changes every derived stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    ModelInit = 1,
    Synthetic = 2,
    Shuffle = 3,
    Split = 4,
}

/// One round of SplitMix64.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix the master seed with a stream label and an extra word (epoch
/// number, city index, ...) into an independent stream seed.
pub fn derive_seed(master: u64, stream: Stream, extra: u64) -> u64 {
    let a = splitmix64(master ^ (stream as u64));
    splitmix64(a ^ extra)
}

/// Seeded generator for the given stream.
pub fn stream_rng(master: u64, stream: Stream, extra: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, extra))
}

/// FNV-1a over bytes; used to key generators from label text.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(42, Stream::ModelInit, 0);
        let b = derive_seed(42, Stream::ModelInit, 0);
        assert_eq!(a, b);
        assert_ne!(a, derive_seed(42, Stream::Shuffle, 0));
        assert_ne!(a, derive_seed(42, Stream::ModelInit, 1));
        assert_ne!(a, derive_seed(43, Stream::ModelInit, 0));
    }

    #[test]
    fn stream_rng_reproduces() {
        let mut r1 = stream_rng(7, Stream::Synthetic, 3);
        let mut r2 = stream_rng(7, Stream::Synthetic, 3);
        let x1: [f64; 4] = std::array::from_fn(|_| r1.random());
        let x2: [f64; 4] = std::array::from_fn(|_| r2.random());
        assert_eq!(x1, x2);
    }

    #[test]
    fn hash_bytes_differs_on_content() {
        assert_ne!(hash_bytes(b"Paris"), hash_bytes(b"Lyon"));
        assert_eq!(hash_bytes(b"Paris"), hash_bytes(b"Paris"));
    }
}
