//! Seeded random streams. Every random draw in a run comes from one of these,
//! keyed by the run seed, so identical seeds give identical runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    PolicyInit = 1,
    CriticInit = 2,
    BcBatches = 3,
    CriticBatches = 4,
    Interpolation = 5,
    GeneratorBatches = 6,
    Synthetic = 7,
    EvalSubsample = 8,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
