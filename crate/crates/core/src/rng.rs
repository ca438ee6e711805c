//! Random streams.
//!
//! Every stochastic routine takes an explicit `&mut R: Rng`. Experiments derive
//! one stream per trial from `(seed, trial index)`: the generator is ChaCha8
//! keyed by `seed` and positioned on stream number `trial`. The family is fixed
//! for a release so that reports are reproducible from the seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream for a single-run computation.
pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream for trial `trial` of an experiment seeded with `seed`.
pub fn substream(seed: u64, trial: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
