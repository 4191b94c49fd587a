//! Counter-based random substreams.
//!
//! Every random draw in the simulator comes from a ChaCha20 keystream keyed by
//! `(master_seed, domain)` and positioned on the 64-bit stream `stream_id`.
//! Substreams never overlap and do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Independent families of random numbers drawn under one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Noise,
    Readout,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Noise => 0x6e6f_6973_6500_0001,
            Domain::Readout => 0x7265_6164_6f75_7402,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Returns the generator for substream `stream_id` of `domain` under `master_seed`.
pub fn substream(master_seed: u64, domain: Domain, stream_id: u64) -> ChaCha20Rng {
    let mut state = master_seed ^ domain.tag();
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream_id);
    rng
}
