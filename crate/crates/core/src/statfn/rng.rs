//! Seedable random streams. A `(seed, stream)` pair fully determines the
//! sequence, so chunked parallel simulation is reproducible regardless of
//! how chunks are scheduled.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::dist::normal_quantile_unchecked;

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform deviate on the open interval (0, 1) with 53 random bits.
    pub fn uniform_open(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * SCALE
    }

    /// Standard normal deviate by inversion of the CDF.
    pub fn standard_normal(&mut self) -> f64 {
        normal_quantile_unchecked(self.uniform_open())
    }
}
