//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! master seed and a tuple of integer coordinates, so results never depend on
//! the order in which threads happen to run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes. Distinct tags keep derived seeds disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Features = 1,
    Assignment = 2,
    Agent = 3,
    Server = 4,
    Objective = 5,
    RegionNoise = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the master seed with a stream tag and coordinates into one 64-bit seed.
pub fn derive_seed(master: u64, stream: Stream, coords: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(stream as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    h
}

pub fn stream(master: u64, stream: Stream, coords: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, coords))
}
