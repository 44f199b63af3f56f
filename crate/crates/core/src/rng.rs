//! Counter-based seeding.
//!
//! All randomness flows from a master seed through ChaCha8 stream selection, so a
//! value is a pure function of `(seed, stream, word position)`. Episodes derive their
//! seed from `(master seed, episode index)`; inside an episode stage `t` (0-based) draws
//! exactly one 64-bit word per seat, seat 1 at word `2t` and seat 2 at word `2t + 1`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream reserved for the per-stage action draws of an episode.
pub(crate) const STREAM_ACTIONS: u64 = 0;
/// Stream used when sampling population members and joint types.
pub(crate) const STREAM_PAIRING: u64 = 1;
/// Salt for meta-strategies that need their own private randomness.
pub(crate) const STREAM_STRATEGY: u64 = 2;

/// Generator positioned at the start of `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent child seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // Stream numbers below 2^32 are reserved for in-episode use.
    stream_rng(seed, (1u64 << 32) | index).next_u64()
}

/// Maps a 64-bit word to a uniform value in `[0, 1)`.
pub fn unit_interval(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF draw from a probability vector; zero-probability entries are never
/// selected.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draws the per-stage uniforms of one episode.
pub(crate) struct StageDraws {
    rng: ChaCha8Rng,
}

impl StageDraws {
    pub(crate) fn new(episode_seed: u64) -> Self {
        Self {
            rng: stream_rng(episode_seed, STREAM_ACTIONS),
        }
    }

    /// The two seat uniforms for the next stage.
    pub(crate) fn next_stage(&mut self) -> [f64; 2] {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        [unit_interval(a), unit_interval(b)]
    }
}
