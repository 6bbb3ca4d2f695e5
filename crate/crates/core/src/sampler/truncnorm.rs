//! Univariate truncated normal draws.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Standard normal truncated to `[a, inf)`.
///
/// Plain rejection when `a <= 0` (acceptance at least one half); otherwise
/// Robert's translated-exponential proposal, which stays efficient far into
/// the tail.
pub fn standard_normal_above<R: Rng + ?Sized>(rng: &mut R, a: f64) -> f64 {
    if a <= 0.0 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= a {
                return z;
            }
        }
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(alpha).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        let rho = (-0.5 * (z - alpha) * (z - alpha)).exp();
        if rng.random::<f64>() <= rho {
            return z;
        }
    }
}

/// Draw from `N(mean, sd^2)` restricted to `(0, inf)` when `positive`, else `(-inf, 0]`.
pub fn sample_sign_truncated<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, positive: bool) -> f64 {
    if positive {
        let z = standard_normal_above(rng, -mean / sd);
        (mean + sd * z).max(f64::MIN_POSITIVE)
    } else {
        let z = -standard_normal_above(rng, mean / sd);
        (mean + sd * z).min(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_normal_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let target = (2.0 / std::f64::consts::PI).sqrt();
        let pos: f64 = (0..n)
            .map(|_| sample_sign_truncated(&mut rng, 0.0, 1.0, true))
            .sum::<f64>()
            / n as f64;
        let neg: f64 = (0..n)
            .map(|_| sample_sign_truncated(&mut rng, 0.0, 1.0, false))
            .sum::<f64>()
            / n as f64;
        assert!((pos - target).abs() < 0.01, "{pos}");
        assert!((neg + target).abs() < 0.01, "{neg}");
    }

    #[test]
    fn far_tail_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            assert!(sample_sign_truncated(&mut rng, -40.0, 1.0, true) > 0.0);
            assert!(sample_sign_truncated(&mut rng, 40.0, 2.0, false) <= 0.0);
        }
    }

    #[test]
    fn tail_mean_matches_mills_ratio() {
        // E[Z | Z > a] = phi(a) / (1 - Phi(a))
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = 2.5;
        let n = 100_000;
        let m: f64 = (0..n).map(|_| standard_normal_above(&mut rng, a)).sum::<f64>() / n as f64;
        let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let expected = phi / crate::stats::norm_sf(a);
        assert!((m - expected).abs() < 0.005, "{m} vs {expected}");
    }
}
