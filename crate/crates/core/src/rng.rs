//! Seed derivation.
//!
//! Every stochastic loop draws from `ChaCha8Rng` keyed by the master seed and a
//! domain tag, with the loop index selecting one of the 2^64 ChaCha streams.
//! The stream of item `i` therefore depends on `(master_seed, domain, i)` only,
//! never on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Null-hypothesis observation streams.
pub const DOMAIN_NULL: u64 = 0x4830;
/// Alternative-hypothesis observation streams.
pub const DOMAIN_ALTERNATIVE: u64 = 0x4831;
/// Random search over the type polytope.
pub const DOMAIN_TYPE_SEARCH: u64 = 0x5459_5045;
/// Free-standing draws (CLI `simulate`, ad hoc sampling).
pub const DOMAIN_SIMULATE: u64 = 0x5349_4d55;

pub fn stream_rng(master_seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child master seed, e.g. one per point of a parameter sweep.
pub fn child_seed(master_seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = master_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
