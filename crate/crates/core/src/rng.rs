//! Seeded random streams.
//!
//! Every stochastic run draws from ChaCha8 keyed by `seed_from_u64(seed)`
//! (the PCG32 key expansion of `rand_core`), with the ChaCha stream number
//! set to the trial index. Trials therefore never share a stream and can
//! run in any order or on any number of threads with identical results.
//! Uniform variates are `f64` in `[0, 1)` built from the top 53 bits of a
//! `u64` draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifier recorded with every stochastic output.
pub const GENERATOR_ID: &str = "chacha8-pcg32seed-stream-v1";

pub type StreamRng = ChaCha8Rng;

/// Generator for trial `stream` of the run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
pub fn uniform(rng: &mut StreamRng) -> f64 {
    rng.random::<f64>()
}

/// Index drawn from `weights` (which should sum to one); zero-weight entries
/// are never chosen.
pub fn categorical(rng: &mut StreamRng, weights: &[f64]) -> usize {
    let u = uniform(rng);
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
