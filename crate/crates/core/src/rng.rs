//! Seeded random streams.
//!
//! Every random choice in the pipeline draws from a ChaCha8 stream whose key
//! is derived from the run seed and a list of integer labels (stage, epoch,
//! word, ...). Labels are mixed with SplitMix64, so a stream depends only on
//! its labels and never on how many draws other streams made. ChaCha8 is a
//! counter-based cipher with a fixed specification, which keeps seeds portable
//! across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a label path.
pub fn derive(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// Stable 64-bit FNV-1a hash, used to turn tokens into stream labels.
pub fn label(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn stream(seed: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(seed, labels))
}
