//! Counter-based random streams keyed by `(seed, stream)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Independent stream `stream` derived from the root `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream positioned at a saved word offset.
pub fn resume_rng(seed: u64, stream: u64, word_pos: u128) -> StreamRng {
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos(word_pos);
    rng
}
