//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha stream derived from the run seed
//! and a fixed tag, so adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod tag {
    pub const GENERATOR_INIT: u64 = 1;
    pub const CRITIC_INIT: u64 = 2;
    pub const SYNTH: u64 = 3;
    pub const ARTIFACT: u64 = 4;
    pub const ARTIFACT_PICK: u64 = 5;
    /// Per-epoch streams are `EPOCH_BASE + epoch`.
    pub const EPOCH_BASE: u64 = 1 << 32;
}

pub fn stream(seed: u64, tag: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}
