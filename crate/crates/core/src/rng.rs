//! Seed expansion.
//!
//! A single `u64` seed fans out into independent ChaCha streams. Stream ids are
//! fixed per purpose so that, for example, changing the noise model never
//! perturbs the manifold draws made from the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Manifold = 1,
    Noise = 2,
    Resample = 3,
    Shuffle = 4,
}

/// A generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer, used to derive child seeds from a parent and a counter.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the `index`-th task under `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(mix64(parent) ^ mix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}
