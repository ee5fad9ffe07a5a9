//! Seeded random streams. One run derives every generator it needs from a
//! single seed; each purpose gets its own ChaCha stream so that turning a
//! pipeline stage on or off never shifts the draws of another stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    UniformSampler = 2,
    RebalancedSampler = 3,
    Mixup = 4,
    MixupPartner = 5,
    Data = 6,
    Shuffle = 7,
}

pub fn stream(seed: u64, which: Stream) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
