//! Deterministic RNG stream derivation.
//!
//! Every consumer of randomness owns a dedicated ChaCha8 stream derived from
//! the scenario seed, a stream tag and a sub index. Streams never interleave,
//! so e.g. arrival sequences are identical for every controller under the
//! same seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Keep values stable: they are part of the reproducibility
/// contract of seeded runs.
pub mod streams {
    /// Per-approach arrival processes (sub = approach index).
    pub const ARRIVALS: u64 = 1;
    /// Epsilon-greedy exploration draws.
    pub const POLICY: u64 = 2;
    /// Replay buffer minibatch sampling.
    pub const REPLAY: u64 = 3;
    /// Network weight initialization.
    pub const NET_INIT: u64 = 4;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent ChaCha8 stream from (seed, tag, sub).
pub fn stream_rng(seed: u64, tag: u64, sub: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut words = [0u64; 4];
    words[0] = splitmix64(&mut state);
    state ^= tag.wrapping_mul(0xa076_1d64_78bd_642f);
    words[1] = splitmix64(&mut state);
    state ^= sub.wrapping_mul(0xe703_7ed1_a0b4_28db);
    words[2] = splitmix64(&mut state);
    words[3] = splitmix64(&mut state);

    let mut bytes = [0u8; 32];
    for (chunk, word) in bytes.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Derives an episode seed from a base seed and episode index.
pub fn episode_seed(base: u64, episode: u64) -> u64 {
    let mut state = base ^ episode.wrapping_mul(0xd6e8_feb8_6659_fd93);
    splitmix64(&mut state)
}
