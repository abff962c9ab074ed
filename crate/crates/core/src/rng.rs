//! Reproducible random streams.
//!
//! Every stream is ChaCha8 (`rand_chacha`) keyed by `seed_from_u64(seed)`,
//! with the ChaCha stream id set to the path (or control) index. Path `p`
//! therefore sees the same numbers regardless of how many other paths are
//! drawn or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GENERATOR: &str = "chacha8:seed_from_u64(seed),stream=index";

pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
