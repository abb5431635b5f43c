//! Seeded random streams.
//!
//! There is no global generator. Each consumer derives its own stream from
//! the master seed, a purpose label and an index, so adding a consumer never
//! perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Stable 64-bit key for `(seed, label, index)`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let a = splitmix64(seed);
    let b = splitmix64(a ^ fnv1a(label));
    splitmix64(b ^ splitmix64(index))
}

/// A fresh stream for `(seed, label, index)`.
pub fn stream(seed: u64, label: &str, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label, index))
}

/// A stream derived from a parent key and a nested index path.
pub fn substream(seed: u64, label: &str, path: &[u64]) -> Stream {
    let key = path
        .iter()
        .fold(derive_seed(seed, label, 0), |k, &i| splitmix64(k ^ splitmix64(i.wrapping_add(1))));
    ChaCha8Rng::seed_from_u64(key)
}
