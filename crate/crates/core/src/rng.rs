//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 stream. Monte-Carlo
//! trials derive their stream from `(master_seed, trial_index)` using the
//! ChaCha stream selector, so trials can run in any order on any number of
//! threads and still see the same numbers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type SimRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent stream for one Monte-Carlo trial.
pub fn trial_stream(master_seed: u64, trial_index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Seeds consumed by one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub measurement: u64,
    pub noise: u64,
}

impl TrialSeeds {
    pub fn derive(master_seed: u64, trial_index: u64) -> Self {
        let mut rng = trial_stream(master_seed, trial_index);
        Self {
            measurement: rng.next_u64(),
            noise: rng.next_u64(),
        }
    }
}
