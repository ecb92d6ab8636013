//! Deterministic seed derivation for replicated experiments.
//!
//! Every replicate owns a generator whose seed is a pure function of
//! `(master_seed, grid_index, replicate)`, so results are independent of
//! worker count and scheduling. The derivation runs each component through a
//! SplitMix64 finalizer, then expands the digest into a 32-byte ChaCha seed.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// The generator used throughout the crate.
pub type Gen = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 32-byte seed derived from `(master, grid_index, replicate)`.
pub fn derive_seed(master: u64, grid_index: u64, replicate: u64) -> [u8; 32] {
    let mut state = master;
    let a = splitmix64(&mut state);
    state = a ^ grid_index;
    let b = splitmix64(&mut state);
    state = b ^ replicate;
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    out
}

/// Generator for one replicate of one grid point.
pub fn replicate_rng(master: u64, grid_index: u64, replicate: u64) -> Gen {
    Gen::from_seed(derive_seed(master, grid_index, replicate))
}

/// Single-stream generator for ad-hoc use (tests, one-shot sampling).
pub fn rng_from_seed(seed: u64) -> Gen {
    replicate_rng(seed, 0, 0)
}
