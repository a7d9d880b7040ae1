//! Seeded random streams.
//!
//! Every trial gets its own ChaCha stream keyed by `seed ^ trial`, so trials
//! can run on any number of threads and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// Stream for trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed ^ trial)
}
