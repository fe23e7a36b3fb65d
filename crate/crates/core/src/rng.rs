//! The single deterministic random stream used everywhere in the crate.
//!
//! Every random draw (gate noise, disorder realizations, ensembles, measurement shots)
//! comes from a [`Stream`]: ChaCha8 keyed by a 64-bit seed via `seed_from_u64`, with an
//! optional 64-bit ChaCha stream id to derive independent sub-streams. Uniform reals are
//! produced as `(next_u64() >> 11) * 2^-53`, so the sequence of `f64` values is fully
//! specified by the seed and identical on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent sub-stream `id` of `seed`; used to give every realization, orbit
    /// chunk or noise run its own stream regardless of execution order.
    pub fn substream(seed: u64, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        Stream { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform in [-eps, eps).
    pub fn symmetric(&mut self, eps: f64) -> f64 {
        eps * (2.0 * self.uniform() - 1.0)
    }

    /// Uniform integer in [0, n) by rejection (unbiased).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.rng.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }

    /// Standard normal deviate (Box-Muller, both branches consumed in order).
    pub fn normal(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                let v = self.uniform();
                return (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos();
            }
        }
    }
}
