//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(derived seed, stream index)`. The derived seed is a SplitMix64 chain over
//! the master seed and a path of labels, so a sample's randomness depends only
//! on where it sits in the experiment, never on which worker produced it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Label namespaces for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Training = 1,
    Test = 2,
    CrossValidation = 3,
    Replicate = 4,
    Pilot = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a path of labels.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// RNG for item `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
