//! Counter-based noise: every `(seed, trajectory, step)` triple owns an
//! independent ChaCha8 block range.
//!
//! Draws for one step never depend on how many draws earlier steps made, so
//! ensembles are reproducible under any scheduling, and different strategies
//! run on the same seed see the same noise at the same step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved for one step (2^32).
const STEP_STRIDE: u32 = 32;

#[derive(Debug, Clone)]
pub struct NoiseStream {
    base: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(trajectory);
        Self { base }
    }

    /// Generator for one time step.
    pub fn step(&self, step: usize) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_word_pos((step as u128) << STEP_STRIDE);
        rng
    }
}
