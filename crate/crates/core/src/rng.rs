//! Counter-based random streams.
//!
//! Every consumer derives its generator from `(seed, domain, trial)`, so a
//! trial's draws do not depend on how many numbers earlier trials consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Learner-side draws (branch coin, indices, signs).
pub const LEARNER: u64 = 0x6c65_6172_6e65_7221;
/// Environment-side draws (loss matrices, noise).
pub const ENVIRONMENT: u64 = 0x656e_7669_726f_6e21;
/// One-off environment setup (hidden spike, planted direction).
pub const SETUP: u64 = 0x7365_7475_7021_2121;

pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
