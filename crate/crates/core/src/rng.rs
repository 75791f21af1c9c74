//! Deterministic counter-based random numbers addressed by `(seed, stream)`.
//!
//! Every consumer of randomness owns a dedicated stream, so drawing extra
//! values in one subsystem can never shift the sequence seen by another.
//! The generator is pure 64-bit integer arithmetic (a SplitMix-style Weyl
//! sequence with a per-stream odd increment), so identical
//! `(seed, stream, draw sequence)` reproduces identical output on every
//! platform.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; a strong 64-bit mixing function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines labels/indices into a stream id. Order-sensitive.
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3u64; // arbitrary nonzero start
    for &p in parts {
        h = mix64(h ^ mix64(p));
    }
    h
}

/// A seeded, stream-addressed random number generator.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
    gamma: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let gamma = mix64(stream.wrapping_mul(GOLDEN).wrapping_add(GOLDEN)) | 1;
        let state = mix64(seed ^ mix64(stream.wrapping_add(GOLDEN)));
        RngStream { state, gamma }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(self.gamma);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Unbiased integer in `[0, n)` (Lemire multiply-shift with rejection).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            let m = (x as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn below_usize(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    /// Standard normal via Box–Muller. Draws two uniforms per call.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Index drawn according to `probs` (assumed to sum to 1).
    pub fn sample_weighted(&mut self, probs: &[f64]) -> usize {
        let u = self.next_f64();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }

    /// `k` distinct indices from `[0, n)` via partial Fisher–Yates,
    /// returned in draw order.
    pub fn pick_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below_usize(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_streams_reproduce() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 8);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_frequencies() {
        // 1e5 draws over 10 bins, each frequency within 0.1 +/- 0.01.
        let mut rng = RngStream::new(3, 1);
        let mut counts = [0usize; 10];
        let n = 100_000;
        for _ in 0..n {
            counts[rng.below_usize(10)] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.1).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn f64_in_unit_interval() {
        let mut rng = RngStream::new(0, 0);
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn weighted_one_hot_always_hits() {
        let mut rng = RngStream::new(5, 5);
        let probs = [0.0, 0.0, 1.0, 0.0];
        for _ in 0..100 {
            assert_eq!(rng.sample_weighted(&probs), 2);
        }
    }

    #[test]
    fn pick_distinct_is_distinct() {
        let mut rng = RngStream::new(9, 2);
        let picks = rng.pick_distinct(20, 8);
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 8);
        assert!(picks.iter().all(|&i| i < 20));
    }

    #[test]
    fn normal_moments_sane() {
        let mut rng = RngStream::new(11, 4);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
