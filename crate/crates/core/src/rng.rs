//! Seeded, replayable random number source.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::{lit, Scalar};

/// Explicit random state. The generator is ChaCha8, which produces the same
/// stream for a given seed on every platform.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent sub-stream of the same seed. Phases of an experiment each
    /// draw from their own stream so that one phase's consumption never shifts
    /// another's draws.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform<T: Scalar>(&mut self) -> T {
        lit(self.inner.random::<f64>())
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in<T: Scalar>(&mut self, lo: T, hi: T) -> T {
        lo + (hi - lo) * self.uniform::<T>()
    }

    pub fn normal<T: Scalar>(&mut self) -> T {
        let z: f64 = StandardNormal.sample(&mut self.inner);
        lit(z)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.random::<f64>() < p
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.inner.random_range(0..=i);
            items.swap(i, j);
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random::<u64>()
    }
}
