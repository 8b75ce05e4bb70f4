//! Seedable, splittable random streams.
//!
//! Every replicate draws from its own ChaCha stream, keyed by the master seed
//! and a stream id derived from its coordinates (e.g. `(d, N, replicate)`).
//! Results therefore do not depend on the order in which replicates run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a tuple of coordinates into a single 64-bit stream id.
pub fn stream_id(coords: &[u64]) -> u64 {
    coords.iter().fold(0x6A09_E667_F3BC_C909, |acc, &c| {
        splitmix64(acc ^ splitmix64(c))
    })
}

/// The generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
