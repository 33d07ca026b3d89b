//! Seeded random streams and binomial draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// Independent stream for replicate `index` under `seed`. The result does not
/// depend on which thread asks for it or in what order.
pub fn rng_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Binomial(n, p) draw; `p` is clamped to [0, 1].
pub fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("n and p are in range")
        .sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_repeats() {
        let a: Vec<u64> = {
            let mut r = rng_stream(42, 7);
            (0..100).map(|_| binomial(&mut r, 1000, 0.3)).collect()
        };
        let mut r = rng_stream(42, 7);
        let b: Vec<u64> = (0..100).map(|_| binomial(&mut r, 1000, 0.3)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn neighbouring_streams_differ() {
        let mut a = rng_stream(42, 0);
        let mut b = rng_stream(42, 1);
        let same = (0..1_000_000)
            .filter(|_| binomial(&mut a, 50_000, 0.02) == binomial(&mut b, 50_000, 0.02))
            .count();
        assert!(same < 1_000_000);
        // Equal draws happen by chance (sd ≈ 31), but nowhere near always.
        assert!(same < 50_000, "{same}");
    }

    #[test]
    fn binomial_edges_and_mean() {
        let mut r = rng_stream(1, 0);
        assert_eq!(binomial(&mut r, 0, 0.5), 0);
        assert_eq!(binomial(&mut r, 10, 0.0), 0);
        assert_eq!(binomial(&mut r, 10, 1.0), 10);
        let n = 100_000_000;
        let x = binomial(&mut r, n, 0.02) as f64;
        let sd = (n as f64 * 0.02 * 0.98).sqrt();
        assert!((x - 2e6).abs() < 6.0 * sd);
    }
}
