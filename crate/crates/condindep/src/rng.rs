//! Splittable random streams for reproducible parallel simulation.
//!
//! Every stream is identified by a master seed plus a path of integer words
//! (replication index, grid-cell key, ...). The path is folded through
//! SplitMix64 into a 256-bit ChaCha key, so any stream can be reconstructed
//! from its coordinates alone: results never depend on thread scheduling or
//! on how work is batched across workers.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold a path of words into a single stream key.
///
/// Distinct (master, path) tuples map to distinct keys up to the usual
/// 2^-64 collision odds; the fold is position-dependent, so permuting the
/// path changes the key.
pub fn derive_key(master: u64, path: &[u64]) -> u64 {
    let mut state = mix(master ^ GOLDEN_GAMMA);
    for (i, &w) in path.iter().enumerate() {
        state = mix(state ^ w.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN_GAMMA)));
    }
    state
}

/// A counter-based random stream (ChaCha8 keyed through SplitMix64).
#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    /// Stream for a bare key.
    pub fn new(key: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut s = key.wrapping_add(GOLDEN_GAMMA);
        for chunk in seed.chunks_exact_mut(8) {
            s = s.wrapping_add(GOLDEN_GAMMA);
            chunk.copy_from_slice(&mix(s).to_le_bytes());
        }
        RngStream {
            inner: ChaCha8Rng::from_seed(seed),
        }
    }

    /// Stream for a (master, path) coordinate, see [`derive_key`].
    pub fn from_path(master: u64, path: &[u64]) -> Self {
        Self::new(derive_key(master, path))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (-1, 1).
    pub fn uniform_pm1(&mut self) -> f64 {
        2.0 * self.uniform01() - 1.0
    }

    /// Standard normal via the inverse-CDF transform of a single uniform
    /// draw. One word consumed per variate, no rejection step, so the draw
    /// count per observation is fixed.
    pub fn std_normal(&mut self) -> f64 {
        // offset keeps the argument strictly inside (0, 1)
        let u = ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        std_normal_quantile(u)
    }
}

fn std_normal_quantile(u: f64) -> f64 {
    Normal::standard().inverse_cdf(u)
}
