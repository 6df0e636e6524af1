//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! user seed plus a `(domain, index)` pair. The index is typically a bootstrap
//! repetition or an image position, so the numbers drawn for item `k` never
//! depend on how many other items exist or which thread handles them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named stream domains. Distinct domains never share a ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    TrainInit = 1,
    TrainShuffle = 2,
    MeanGraphSubset = 3,
    ShiftSelect = 4,
    ShiftImage = 5,
    Bootstrap = 6,
    DetectSplit = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for item `index` of `domain` under `seed`.
pub fn substream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    let parts = [
        splitmix64(seed),
        splitmix64(seed ^ (domain as u64).rotate_left(32)),
        splitmix64(index ^ 0x5851_f42d_4c95_7f2d),
        splitmix64((domain as u64) ^ index.rotate_left(17)),
    ];
    for (chunk, p) in key.chunks_exact_mut(8).zip(parts) {
        chunk.copy_from_slice(&p.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(domain as u64);
    rng
}
