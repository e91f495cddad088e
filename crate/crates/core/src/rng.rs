//! Seeded, splittable random streams.
//!
//! A stream is a ChaCha8 generator keyed by the base seed, with the 64-bit
//! ChaCha stream id derived from a path of integers (for example
//! `[LAYER_GRAPH, n, degree_seq_id, graph_id]`). Distinct paths give
//! independent generators, so each randomness layer can be fixed or
//! resampled on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const LAYER_DEGREES: u64 = 1;
pub const LAYER_GRAPH: u64 = 2;
pub const LAYER_VOTER: u64 = 3;
pub const LAYER_WALK: u64 = 4;
pub const LAYER_KINGMAN: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a stream path into a single stream id.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter().fold(0x6A09_E667_F3BC_C908u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Independent generator for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(path));
    rng
}
