//! Independent random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Fps = 2,
    /// Indexed by optimizer step.
    Probes = 3,
    Eval = 4,
    Embed = 5,
}

/// Generator for `(master, stream, index)`. Distinct triples give
/// non-overlapping ChaCha streams.
pub fn stream_rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    assert!(index < 1 << 40, "stream index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((stream as u64) << 40) | index);
    rng
}
