//! Deterministic, splittable random streams.
//!
//! Every stochastic task draws from its own ChaCha8 stream. The stream is
//! selected from the master seed and a task key (a domain tag plus up to a few
//! integer coordinates such as channel, epoch and replicate), so results do not
//! depend on the order in which parallel tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep unrelated consumers of the same seed on disjoint streams.
pub mod tag {
    pub const BOOTSTRAP: u64 = 1;
    pub const COPULA_SAMPLE: u64 = 2;
    pub const DGP: u64 = 3;
    pub const KLIC: u64 = 4;
    pub const TEST: u64 = 99;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a tag and coordinates into a single 64-bit stream identifier.
pub fn stream_id(tag: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(tag), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Returns the generator for `(seed, tag, coords)`.
pub fn stream(seed: u64, tag: u64, coords: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, coords));
    rng
}
