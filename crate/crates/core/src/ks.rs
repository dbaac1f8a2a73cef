//! One-sample Kolmogorov-Smirnov statistic.

/// KS statistic of `samples` against a CDF given as a callable.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut stat = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let c = cdf(x);
        let above = (i as f64 + 1.0) / n - c;
        let below = c - i as f64 / n;
        stat = stat.max(above).max(below);
    }
    stat
}

/// KS statistic against the uniform distribution on [0, 1].
pub fn uniform_ks_statistic(samples: &[f64]) -> f64 {
    ks_statistic(samples, |x| x.clamp(0.0, 1.0))
}

/// Critical value at significance 0.01 for the one-sample test:
/// `1.63 / sqrt(n)` (asymptotic).
pub fn ks_threshold(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn exact_grid_has_small_statistic() {
        // Midpoints of n equal bins: the empirical CDF straddles the
        // diagonal with deviation 1/(2n).
        let n = 1000;
        let samples: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let stat = uniform_ks_statistic(&samples);
        assert!((stat - 0.5 / n as f64).abs() < 1e-12, "stat {stat}");
    }

    #[test]
    fn uniform_samples_pass_at_pinned_seed() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let n = 50_000;
        let samples: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        assert!(uniform_ks_statistic(&samples) < ks_threshold(n));
    }

    #[test]
    fn shifted_samples_fail() {
        let n = 10_000;
        let samples: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64) * 0.9).collect();
        assert!(uniform_ks_statistic(&samples) > ks_threshold(n));
    }
}
