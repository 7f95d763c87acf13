//! Reproducible parallel Monte Carlo: work is cut into a fixed number of
//! streams, each with its own ChaCha stream id, so results depend only on the
//! seed and never on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::scalar::CompensatedSum;

pub const STREAMS: u64 = 64;

/// Runs `f(rng, count)` on every stream, where the counts sum to `samples`,
/// and returns the per-stream results in stream order.
pub fn split_streams<A, F>(samples: u64, seed: u64, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> A + Sync,
{
    (0..STREAMS)
        .into_par_iter()
        .map(|c| {
            let count = samples / STREAMS + u64::from(c < samples % STREAMS);
            let mut rng = stream_rng(seed, c);
            f(&mut rng, count)
        })
        .collect()
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample mean and standard error with compensated accumulation.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    count: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum.add(other.sum.value());
        self.sum_sq.add(other.sum_sq.value());
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sum.value() / self.count as f64
    }

    /// Standard error of the mean (unbiased variance).
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.mean();
        let var = ((self.sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}
