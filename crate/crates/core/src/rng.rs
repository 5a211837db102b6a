//! Counter-addressed random streams.
//!
//! Every Gaussian used by a simulation is addressed by
//! `(master seed, path, lane, block, position)`: the path and lane select a
//! ChaCha stream, the block (a time step or a snapshot interval) selects a
//! fixed word offset, and draws within a block are consumed in order. Two
//! consumers that read the same block see the same prefix of draws no
//! matter how many further draws either of them takes, which is what lets
//! the nonlinear solver and the Langevin solver share the increments of the
//! common noise modes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Words reserved per block. Far more than any block consumes.
const BLOCK_WORDS: u128 = 1 << 32;

/// Independent sub-streams of a single path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Lane {
    /// Per-step Brownian increments of the noise modes.
    Increments = 0,
    /// Aggregated increments of Langevin modes not shared with the nonlinear path.
    Fresh = 1,
    /// Random initial data.
    Initial = 2,
}

const LANES: u64 = 3;

#[derive(Clone, Debug)]
pub struct IncrementStream {
    seed: u64,
    path: u64,
    lane: Lane,
    rng: ChaCha8Rng,
}

impl IncrementStream {
    pub fn new(seed: u64, path: u64, lane: Lane) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path.wrapping_mul(LANES).wrapping_add(lane as u64));
        Self { seed, path, lane, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> u64 {
        self.path
    }

    pub fn lane(&self) -> Lane {
        self.lane
    }

    /// Standard normal draws `0..count` of `block`.
    pub fn normals(&mut self, block: u64, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        self.fill_normals(block, &mut out);
        out
    }

    /// Fills `out` with the first `out.len()` standard normals of `block`.
    pub fn fill_normals(&mut self, block: u64, out: &mut [f64]) {
        self.rng.set_word_pos(block as u128 * BLOCK_WORDS);
        for v in out.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
    }

    /// One uniform draw in `[0, 1)` from `block`.
    pub fn uniform(&mut self, block: u64) -> f64 {
        self.rng.set_word_pos(block as u128 * BLOCK_WORDS);
        self.rng.random::<f64>()
    }
}
