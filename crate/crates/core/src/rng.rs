//! Counter-based random streams.
//!
//! Every draw in a simulation is addressed by `(seed, replication, variable)`:
//! the seed and replication index form the ChaCha key and the variable id
//! selects the stream. Replication `r` therefore sees the same numbers whether
//! it runs alone, in a batch, or on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the variables of a simulated sample.
pub mod stream {
    pub const X: u64 = 0;
    pub const U: u64 = 1;
    pub const X2: u64 = 2;
    pub const W: u64 = 3;
}

pub fn substream(seed: u64, replication: u64, variable: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replication.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(variable);
    rng
}
