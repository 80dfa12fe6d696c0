//! Seeded random streams.
//!
//! Every consumer of randomness derives its generator from the instance seed
//! and a fixed purpose tag, plus an index (sample number, epoch, ...). Streams
//! never share state, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    KMeans = 1,
    Perturbation = 2,
    ContentUniform = 3,
    Fixture = 4,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}
