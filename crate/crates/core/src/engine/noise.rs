//! Reproducible Wiener increments, one independent stream per trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian increments `dW ~ N(0, dt)` drawn from the ChaCha stream
/// `(seed, stream_id)`.
///
/// With `refinement = r` each increment is the sum of `2^r` sub-increments of
/// variance `dt / 2^r`. A run at `(dt/2, r)` therefore sees exactly the same
/// Brownian path as a run at `(dt, r + 1)`, which couples dt-halving
/// comparisons pathwise.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    sub_sd: f64,
    substeps: u32,
}

impl NoiseStream {
    pub fn new(seed: u64, stream_id: u64, dt: f64, refinement: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        let substeps = 1u32 << refinement;
        NoiseStream {
            rng,
            sub_sd: (dt / substeps as f64).sqrt(),
            substeps,
        }
    }

    pub fn next_increment(&mut self) -> f64 {
        let mut sum = 0.0;
        for _ in 0..self.substeps {
            let z: f64 = self.rng.sample(StandardNormal);
            sum += z;
        }
        sum * self.sub_sd
    }

    pub fn increments(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.next_increment()).collect()
    }
}
