//! Chunked, schedule-independent Monte Carlo plumbing.
//!
//! Chunk `c` of a run draws from ChaCha8 stream `c` of a seed derived from
//! `(seed, tag)`, and chunk statistics are merged in chunk order, so results
//! are bit-identical for any rayon pool size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

pub(crate) const CHUNK: usize = 4096;

pub(crate) mod tag {
    pub const MOMENT: u64 = 1;
    pub const SUP: u64 = 2;
    pub const RATIO: u64 = 3;
    pub const PILOT: u64 = 4;
    pub const SEARCH: u64 = 5;
    pub const SUP_SQ: u64 = 6;
    pub const POWER: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn stream_rng(seed: u64, tag: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(tag)));
    rng.set_stream(stream);
    rng
}

pub(crate) fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform on `(0, 1]`.
pub(crate) fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Two-sided normal quantile `Φ⁻¹((1 + level)/2)`.
pub(crate) fn z_value(level: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 * (1.0 + level))
}

/// Running means, second moments and co-moment of a pair of observables.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PairStats {
    pub n: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    m2a: f64,
    m2b: f64,
    cab: f64,
}

impl PairStats {
    pub fn push(&mut self, a: f64, b: f64) {
        self.n += 1.0;
        let da = a - self.mean_a;
        let db = b - self.mean_b;
        self.mean_a += da / self.n;
        self.mean_b += db / self.n;
        self.m2a += da * (a - self.mean_a);
        self.m2b += db * (b - self.mean_b);
        self.cab += da * (b - self.mean_b);
    }

    pub fn merge(&mut self, o: &PairStats) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let da = o.mean_a - self.mean_a;
        let db = o.mean_b - self.mean_b;
        let w = self.n * o.n / n;
        self.mean_a += da * o.n / n;
        self.mean_b += db * o.n / n;
        self.m2a += o.m2a + da * da * w;
        self.m2b += o.m2b + db * db * w;
        self.cab += o.cab + da * db * w;
        self.n = n;
    }

    pub fn var_a(&self) -> f64 {
        if self.n > 1.0 {
            (self.m2a / (self.n - 1.0)).max(0.0)
        } else {
            0.0
        }
    }

    pub fn var_b(&self) -> f64 {
        if self.n > 1.0 {
            (self.m2b / (self.n - 1.0)).max(0.0)
        } else {
            0.0
        }
    }

    pub fn cov(&self) -> f64 {
        if self.n > 1.0 {
            self.cab / (self.n - 1.0)
        } else {
            0.0
        }
    }
}

/// Runs `samples` draws of `f` in fixed-size chunks and merges in chunk order.
/// `f` gets a per-chunk scratch buffer it may resize freely.
pub(crate) fn run<F>(samples: usize, seed: u64, tag: u64, f: F) -> PairStats
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<f64>) -> (f64, f64) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<PairStats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, tag, c as u64);
            let mut scratch = Vec::new();
            let mut stats = PairStats::default();
            let len = CHUNK.min(samples - c * CHUNK);
            for _ in 0..len {
                let (a, b) = f(&mut rng, &mut scratch);
                stats.push(a, b);
            }
            stats
        })
        .collect();
    let mut total = PairStats::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential_accumulation() {
        let xs: Vec<(f64, f64)> = (0..1000).map(|i| ((i as f64).sin(), (i as f64 * 0.3).cos() * 2.0)).collect();
        let mut whole = PairStats::default();
        xs.iter().for_each(|&(a, b)| whole.push(a, b));
        let mut left = PairStats::default();
        let mut right = PairStats::default();
        xs[..377].iter().for_each(|&(a, b)| left.push(a, b));
        xs[377..].iter().for_each(|&(a, b)| right.push(a, b));
        left.merge(&right);
        assert!((left.mean_a - whole.mean_a).abs() < 1e-14);
        assert!((left.var_b() - whole.var_b()).abs() < 1e-12);
        assert!((left.cov() - whole.cov()).abs() < 1e-12);
    }

    #[test]
    fn runs_are_independent_of_pool_size() {
        let f = |rng: &mut ChaCha8Rng, _: &mut Vec<f64>| {
            let g = normal(rng);
            (g, g * g)
        };
        let a = run(20_000, 7, tag::MOMENT, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run(20_000, 7, tag::MOMENT, f));
        assert_eq!(a.mean_a.to_bits(), b.mean_a.to_bits());
        assert_eq!(a.var_b().to_bits(), b.var_b().to_bits());
    }

    #[test]
    fn quantile() {
        assert!((z_value(0.95) - 1.959_963_984_540_054).abs() < 1e-9);
    }
}
