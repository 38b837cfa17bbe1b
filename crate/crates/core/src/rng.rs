//! Counter-based random number generation.
//!
//! Every Monte-Carlo sample draws from a ChaCha8 stream keyed on
//! `(seed, stream, sample index)`, so a sample's randomness depends only on
//! its index and never on which worker computed it. Parallel runs are
//! bit-identical to serial runs for any thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Logical sub-streams, so different consumers of the same user seed do not
/// share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    GaussianMc = 0,
    RademacherMc = 1,
    GaussianTransfer = 2,
    InstanceGen = 3,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for one sample: key = (seed, stream, index, mix).
pub fn sample_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..32].copy_from_slice(&splitmix64(seed ^ index.rotate_left(32)).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
