//! Named, indexable random substreams.
//!
//! Every stochastic consumer draws from a ChaCha8 stream keyed by the master
//! seed and selected by `(Stream, index)`. A Monte Carlo trial therefore sees
//! the same numbers whether it runs first, last, or on another thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Consumers of randomness. The discriminant selects the stream family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// User AoDs at the RIS.
    Angles = 1,
    /// User positions on the disk (index = drop).
    Scene = 2,
    /// Channel draws (index = trial).
    Channel = 3,
    /// Particle swarm (index = restart).
    Pso = 4,
    /// Fixed random phase vectors.
    Phases = 5,
    /// Quantization noise draws.
    Quantization = 6,
}

/// Independent generator for `(seed, stream, index)`.
pub fn substream(seed: u64, stream: Stream, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 8 bits of family, 56 bits of index.
    rng.set_stream(((stream as u64) << 56) | (index & ((1 << 56) - 1)));
    rng
}
