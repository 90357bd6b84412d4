//! Counter-keyed random streams.
//!
//! Every random draw in a Monte Carlo run comes from a ChaCha8 stream keyed by
//! the run seed, with the stream number packing the replicate index and the
//! role the draws play. A replicate therefore sees the same numbers whether
//! replicates run sequentially or on a worker pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ROLE_BITS: u32 = 8;

/// What a stream is used for inside one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamRole {
    Sample = 1,
    Train = 2,
    Validation = 3,
    Shuffle = 4,
    Noise = 5,
    Signal = 6,
    Family = 7,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Stream for `(seed, replicate, role)`.
///
/// # Panics
/// If `replicate` does not fit in 56 bits.
pub fn stream(seed: u64, replicate: u64, role: StreamRole) -> ChaCha8Rng {
    assert!(
        replicate < (1u64 << (64 - ROLE_BITS)),
        "replicate index {replicate} too large for stream packing"
    );
    let mut rng = ChaCha8Rng::from_seed(key_from_seed(seed));
    rng.set_stream((replicate << ROLE_BITS) | role as u64);
    rng
}
