//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! run seed, so switching one consumer off never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named stream identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    SourceShuffle = 2,
    TargetShuffle = 3,
    SourceDropout = 4,
    TargetDropout = 5,
    KernelSample = 6,
    Mix = 7,
    Synth = 8,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Fisher-Yates in place.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
}
