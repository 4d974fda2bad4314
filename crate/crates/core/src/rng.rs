//! Seed derivation and uniform streams.
//!
//! A master seed and a tag path (purpose, indices) are folded through
//! SplitMix64 into a 64-bit key; the key seeds a ChaCha20 generator. Each
//! instance, scenario draw and initial point gets its own key, so drawing one
//! stream never shifts another and any single run can be regenerated in
//! isolation. Uniform deviates use the top 53 bits of each output word.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const TAG_INSTANCE: u64 = 0x494e_5354;
pub const TAG_SCENARIO: u64 = 0x5343_454e;
pub const TAG_INIT_POINT: u64 = 0x494e_4954;
pub const TAG_PROBE: u64 = 0x5052_4f42;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `tags` into `seed`; distinct paths give unrelated keys.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub struct UniformStream {
    rng: ChaCha20Rng,
}

impl UniformStream {
    pub fn new(key: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(key),
        }
    }

    pub fn from_path(seed: u64, tags: &[u64]) -> Self {
        Self::new(derive_seed(seed, tags))
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    pub fn uniform_vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform(lo, hi)).collect()
    }
}
