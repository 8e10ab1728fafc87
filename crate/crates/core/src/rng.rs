//! Counter-based random streams.
//!
//! Every random decision in the engine draws from a ChaCha8 generator keyed
//! by the experiment seed and a stream id. Stream ids are derived from the
//! logical coordinates of the draw (epoch, example index, rollout, ...), so
//! results do not depend on batch composition or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Folds a list of coordinates into a single stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Generator for a coordinate tuple under `seed`.
pub fn rng_for(seed: u64, parts: &[u64]) -> Rng {
    stream_rng(seed, stream_id(parts))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
