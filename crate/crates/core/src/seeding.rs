//! Random stream split.
//!
//! Every run seed owns one ChaCha8 key (`seed_from_u64(run_seed)`); each
//! consumer draws from its own stream id on that key. Policies therefore see
//! identical scenarios, task sequences and game grant orders for the same run
//! seed, and a policy's own randomness never perturbs the shared streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scenario = 0,
    Tasks = 1,
    Game = 2,
    /// Randomised baseline decisions.
    Policy = 3,
    /// Agent weight init, exploration, dropout and replay sampling.
    Agent = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
