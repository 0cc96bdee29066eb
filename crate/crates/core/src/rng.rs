//! Deterministic random number streams.
//!
//! All randomness in the crate flows through ChaCha8, which has a documented,
//! platform-independent bitstream. Independent sub-streams are derived from a
//! single master seed via the generator's 64-bit stream id, so adding threads
//! or reordering work never changes what any consumer draws.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Generator seeded directly from a 64-bit seed, stream 0.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for the sub-stream identified by `ids` under `seed`.
///
/// The ids are folded into a single stream id with FNV-1a, so any fixed
/// hierarchy of indices (epoch, batch, image, read, ...) yields a stable,
/// collision-resistant stream assignment.
pub fn stream(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(ids));
    rng
}

/// FNV-1a over the little-endian bytes of `ids`.
pub fn mix(ids: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for id in ids {
        for b in id.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_draws() {
        let a: Vec<u64> = seeded(7).sample_iter(rand::distributions::Standard).take(8).collect();
        let b: Vec<u64> = seeded(7).sample_iter(rand::distributions::Standard).take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_are_distinct() {
        let a: u64 = stream(7, &[0]).gen();
        let b: u64 = stream(7, &[1]).gen();
        let c: u64 = stream(8, &[0]).gen();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mix_distinguishes_orderings() {
        assert_ne!(mix(&[1, 2]), mix(&[2, 1]));
        assert_ne!(mix(&[]), mix(&[0]));
    }

    /// Pins the generator's bitstream: a change here means saved seeds no
    /// longer reproduce published runs.
    #[test]
    fn bitstream_is_pinned() {
        let first: u64 = seeded(0).gen();
        assert_eq!(first, 0xb585f767a79a3b6c);
        let streamed: u64 = stream(42, &[1, 2]).gen();
        assert_eq!(streamed, 0x4dc9566ca9b44041);
    }
}
