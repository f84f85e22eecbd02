//! Seeded random-number streams for reproducible simulations.
//!
//! Every stochastic component in this crate draws from an [`RngStream`]: a
//! ChaCha20 generator addressed by a (master seed, stream id) pair. Distinct
//! stream ids give statistically independent streams under the same master
//! seed, and `substream` derives a child family so nested structure (dataset
//! -> bootstrap replicate) stays reproducible regardless of evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// A deterministic, independently-addressable random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha20Rng,
    master: u64,
    stream_id: u64,
    /// Second normal from the last Box-Muller pair, if unused.
    spare_normal: Option<f64>,
}

impl RngStream {
    /// Stream `stream_id` under `master`. Equal pairs give identical streams;
    /// different pairs give independent ones.
    pub fn new(master: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master);
        rng.set_stream(stream_id);
        RngStream {
            rng,
            master,
            stream_id,
            spare_normal: None,
        }
    }

    /// Child stream family: `substream(k)` is independent of the parent and
    /// of `substream(k')` for `k != k'`.
    ///
    /// The child master mixes this stream's (master, id) through a SplitMix64
    /// finalizer so that children of different parents never collide.
    pub fn substream(&self, k: u64) -> RngStream {
        let child_master = splitmix_mix(self.master ^ splitmix_mix(self.stream_id));
        RngStream::new(child_master, k)
    }

    /// Uniform draw on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform index in 0..bound (Lemire-style rejection via the rand crate).
    #[inline]
    pub fn uniform_index(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        self.rng.gen_range(0..bound)
    }

    /// Standard normal draw via Box-Muller (pairs cached).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // Box-Muller on (0,1] x [0,1) to avoid ln(0).
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Vector of iid standard normals.
    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.uniform_index(i + 1);
            items.swap(i, j);
        }
    }
}

/// SplitMix64 finalizer: a bijective avalanche mix on u64.
#[inline]
fn splitmix_mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
