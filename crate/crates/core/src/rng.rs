//! Seeded, counter-based random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Generator for a root seed.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under the same root seed; used to give each
/// chunk of a parallel job its own reproducible sequence.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
