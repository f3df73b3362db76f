//! Named random streams derived from a single experiment seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams so components can be re-seeded separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Reset = 1,
    Exploration = 2,
    Replay = 3,
    Init = 4,
    Probe = 5,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
