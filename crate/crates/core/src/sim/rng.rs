//! Sampling on top of ChaCha8. Only `next_u64` is taken from the generator;
//! every distribution is derived here so that replays do not depend on the
//! sampling code of any particular library release.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Generator for stream `stream` of scenario seed `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in `[0, 1)` with 53 bits of precision.
pub fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Uniform integer in `[0, n)` by rejection, `n > 0`.
pub fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    assert!(n > 0, "empty range");
    let limit = u64::MAX - u64::MAX % n;
    loop {
        let v = rng.next_u64();
        if v < limit {
            return v % n;
        }
    }
}

pub fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    unit(rng) < p
}

/// Exponential with the given mean, rounded to whole seconds, at least 1.
pub fn exp_secs(rng: &mut ChaCha8Rng, mean_s: f64) -> i64 {
    let u = unit(rng);
    (-(1.0 - u).ln() * mean_s).round().clamp(1.0, 1e15) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_replay_and_differ() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, 1).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(stream(7, 1).next_u64(), stream(7, 2).next_u64());
        assert_ne!(stream(7, 1).next_u64(), stream(8, 1).next_u64());
    }

    #[test]
    fn sample_moments() {
        let mut rng = stream(42, 0);
        let n = 200_000;
        let mean_u: f64 = (0..n).map(|_| unit(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean_u - 0.5).abs() < 0.005);
        let mean_e: f64 = (0..n).map(|_| exp_secs(&mut rng, 1000.0) as f64).sum::<f64>() / n as f64;
        assert!((mean_e - 1000.0).abs() < 15.0, "{mean_e}");
        let mut counts = [0u32; 6];
        for _ in 0..60_000 {
            counts[below(&mut rng, 6) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (9_500..10_500).contains(&c)), "{counts:?}");
    }
}
