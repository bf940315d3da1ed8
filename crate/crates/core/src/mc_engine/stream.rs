//! Counter-based per-sample random streams.
//!
//! A stream is a ChaCha8 generator whose 256-bit key is expanded from
//! `(seed, lane)` with SplitMix64 and whose 64-bit stream id is the sample
//! index. Any `(seed, lane, sample_index)` triple therefore maps to one fixed
//! stream no matter which worker evaluates it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Lane used by the estimation engine for outer samples.
pub const OUTER_LANE: u64 = 0;
/// Lane used for auxiliary randomness (permutation tests, fixed finite measures).
pub const AUX_LANE: u64 = 0x5eed_0a11;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key_for(seed: u64, lane: u64) -> [u8; 32] {
    let mut state = seed ^ lane.rotate_left(32).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Derives the stream for one sample. `lane` namespaces independent uses of
/// the same seed; the engine keys outer samples by global sample index only,
/// so worker scheduling never changes which stream a sample sees.
pub fn derive_stream(seed: u64, lane: u64, sample_index: u64) -> Stream {
    let mut rng = ChaCha8Rng::from_seed(key_for(seed, lane));
    rng.set_stream(sample_index);
    rng
}
