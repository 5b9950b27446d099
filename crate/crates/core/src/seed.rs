//! Seed derivation. Every random stream in a run is derived from one master
//! seed so that runs are reproducible bit for bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent consumers of one master seed apart.
pub mod stream {
    pub const MEDIA: u64 = 1;
    pub const LINK: u64 = 2;
    pub const SENDER_CODEC: u64 = 3;
    pub const RELAY_CODEC: u64 = 4;
    pub const SPT: u64 = 5;
    pub const SWEEP: u64 = 6;
    pub const MEDIA_CONTENT: u64 = 7;
}

/// Derives a child seed for `(stream, index)` from `master`.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
