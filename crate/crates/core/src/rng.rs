//! Seeded uniform draws.
//!
//! All randomness comes from ChaCha20 (RFC 8439 block function, as in
//! `rand_chacha`). The 256-bit key is the `u64` seed in little-endian order
//! followed by 24 zero bytes, and each consumer reads its own stream id so
//! the dataset, θ initialisation and Ising coefficients never share words.
//! A uniform draw on `[0, 1)` is `(next_u64 >> 11) · 2⁻⁵³`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Dataset = 0,
    ThetaInit = 1,
    Ising = 2,
}

#[derive(Debug, Clone)]
pub struct SeededUniform {
    rng: ChaCha20Rng,
}

impl SeededUniform {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream as u64);
        Self { rng }
    }

    /// Uniform on `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[low, high)`.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_unit()
    }
}
