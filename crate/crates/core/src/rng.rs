//! Seeded random streams.
//!
//! Every run owns one independent ChaCha stream per consumer, so the
//! environment, the agent's exploration, the selector and the teacher never
//! perturb each other's draws. Two runs with the same seed that differ only
//! in how they use feedback therefore see identical ghost moves, resets and
//! exploration coins until their trajectories diverge.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Environment = 1,
    Agent = 2,
    Selector = 3,
    Teacher = 4,
    Oracle = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunSeed(pub u64);

impl RunSeed {
    /// Seed of run `k` in a batch; `salt` separates combinations that must
    /// not share random numbers.
    pub fn for_run(base: u64, run: usize, salt: u64) -> Self {
        let seed = base.wrapping_add(run as u64);
        RunSeed(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn stream(self, stream: Stream) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream as u64);
        rng
    }
}

/// Uniform draw in `[0, 1)` that always consumes exactly one word.
pub(crate) fn unit(rng: &mut SimRng) -> f64 {
    rng.gen::<f64>()
}

/// Maps a unit draw onto `0..n` without rejection sampling.
pub(crate) fn index_from_unit(u: f64, n: usize) -> usize {
    debug_assert!(n > 0);
    ((u * n as f64) as usize).min(n - 1)
}
