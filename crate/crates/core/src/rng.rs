//! Seeded random streams.
//!
//! Every random decision flows from one master seed. Each subsystem gets its
//! own ChaCha stream keyed by `(master seed, subsystem, index)`, so streams
//! are independent of each other and of the order in which they are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Subsystems that draw random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Augment = 3,
    Batch = 4,
    Permutation = 5,
    Synth = 6,
    Folds = 7,
}

/// Plain seeded generator.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for item `index` of subsystem `stream` under `master`.
pub fn stream_rng(master: u64, stream: Stream, index: u64) -> Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
