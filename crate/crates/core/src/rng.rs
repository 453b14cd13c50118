//! Seeded random streams.
//!
//! Every stochastic subsystem draws from its own ChaCha stream derived from
//! the master seed, so switching one feature on or off leaves the others'
//! draws untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Demand = 1,
    Noise = 2,
    Strategy = 3,
    Exploration = 4,
    Choice = 5,
    Init = 6,
    Replay = 7,
    Membership = 8,
    Fleet = 9,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
