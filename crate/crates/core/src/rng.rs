//! Named random substreams. Every consumer of randomness derives its
//! generator from the run seed plus one of these stream tags, so adding a
//! consumer never shifts another consumer's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const INITIAL_SPREAD: u64 = 1 << 60;
pub const ROUNDS: u64 = 2 << 60;
pub const AGENTS: u64 = 3 << 60;
pub const FILES: u64 = 4 << 60;
pub const MONTE_CARLO: u64 = 5 << 60;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
