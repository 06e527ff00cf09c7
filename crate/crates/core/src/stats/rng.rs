//! Seeded, stream-addressable RNG.
//!
//! Monte Carlo replication r draws from stream r of the study seed, so the
//! draws a replication sees do not depend on scheduling or on how many
//! worker threads run. ChaCha gives 2^64 independent streams per seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
