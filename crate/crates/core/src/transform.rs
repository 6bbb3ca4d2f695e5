//! Box-Cox transformation, its standardized form and the bias-corrected
//! back-transform used to turn latent-scale means into intakes.
//!
//! The standardized transform is
//! `g_tr(y) = sqrt(2) * (boxcox(y, lambda) - mu) / sigma`, where `mu` and
//! `sigma` are the mean and standard deviation of the Box-Cox values of the
//! positive amounts. `g_tr_star` adds half the within-person variance times
//! the second derivative of the inverse, a second-order correction for the
//! mean of a nonlinear function of a normal variable.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, norm_quantile, pearson, sample_sd};

const LAMBDA_ZERO_TOL: f64 = 1e-12;

/// Floor applied to `lambda * z + 1` when an out-of-range latent value must
/// be mapped back without failing.
pub const INVERSE_BASE_FLOOR: f64 = 1e-8;

pub const MIN_LAMBDA_SAMPLE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl TransformSpec {
    pub fn new(lambda: f64, mu: f64, sigma: f64) -> Result<Self> {
        let spec = Self { lambda, mu, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || !self.mu.is_finite() {
            return Err(Error::domain("transform lambda and mu must be finite"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!(
                "transform sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Freeze `mu` and `sigma` from the Box-Cox values of `positive_values`.
    pub fn fit(positive_values: &[f64], lambda: f64) -> Result<Self> {
        if positive_values.len() < 2 {
            return Err(Error::domain("transform fit needs at least two positive values"));
        }
        let z = positive_values
            .iter()
            .map(|&y| boxcox(y, lambda))
            .collect::<Result<Vec<_>>>()?;
        let sigma = sample_sd(&z);
        if !(sigma > 0.0) {
            return Err(Error::domain("transform fit: positive values have zero variance"));
        }
        Self::new(lambda, mean(&z), sigma)
    }

    /// Pick lambda on the default grid, then freeze `mu` and `sigma`.
    pub fn estimate(positive_values: &[f64]) -> Result<Self> {
        let lambda = estimate_lambda(positive_values)?;
        Self::fit(positive_values, lambda)
    }

    fn is_log(&self) -> bool {
        self.lambda.abs() < LAMBDA_ZERO_TOL
    }

    /// Box-Cox scale value for latent `v`.
    fn boxcox_scale(&self, v: f64) -> f64 {
        self.sigma * v / SQRT_2 + self.mu
    }
}

pub fn boxcox(y: f64, lambda: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::domain(format!("Box-Cox needs y > 0, got {y}")));
    }
    if lambda.abs() < LAMBDA_ZERO_TOL {
        Ok(y.ln())
    } else {
        Ok((y.powf(lambda) - 1.0) / lambda)
    }
}

pub fn g_tr(y: f64, spec: &TransformSpec) -> Result<f64> {
    Ok(SQRT_2 * (boxcox(y, spec.lambda)? - spec.mu) / spec.sigma)
}

/// Log of `d g_tr / dy` at `y`.
pub fn log_jacobian(y: f64, spec: &TransformSpec) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::domain(format!("Jacobian needs y > 0, got {y}")));
    }
    Ok((SQRT_2 / spec.sigma).ln() + (spec.lambda - 1.0) * y.ln())
}

fn inverse_base(v: f64, spec: &TransformSpec) -> f64 {
    spec.lambda * spec.boxcox_scale(v) + 1.0
}

fn inverse_from_base(v: f64, base: f64, spec: &TransformSpec) -> f64 {
    if spec.is_log() {
        spec.boxcox_scale(v).exp()
    } else {
        base.powf(1.0 / spec.lambda)
    }
}

fn second_derivative_from_base(v: f64, base: f64, spec: &TransformSpec) -> f64 {
    let scale2 = spec.sigma * spec.sigma / 2.0;
    if spec.is_log() {
        scale2 * spec.boxcox_scale(v).exp()
    } else {
        scale2 * (1.0 - spec.lambda) * base.powf(1.0 / spec.lambda - 2.0)
    }
}

fn checked_base(v: f64, spec: &TransformSpec) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::domain(format!("inverse transform needs finite v, got {v}")));
    }
    let base = inverse_base(v, spec);
    if !spec.is_log() && !(base > 0.0) {
        return Err(Error::domain(format!(
            "v = {v} lies outside the image of the Box-Cox transform with lambda {}",
            spec.lambda
        )));
    }
    Ok(base)
}

fn clamped_base(v: f64, spec: &TransformSpec) -> f64 {
    let base = inverse_base(v, spec);
    if spec.is_log() {
        base
    } else {
        base.max(INVERSE_BASE_FLOOR)
    }
}

pub fn g_tr_inverse(v: f64, spec: &TransformSpec) -> Result<f64> {
    let base = checked_base(v, spec)?;
    Ok(inverse_from_base(v, base, spec))
}

/// Like [`g_tr_inverse`] but floors an out-of-image base at
/// [`INVERSE_BASE_FLOOR`] instead of failing.
pub fn g_tr_inverse_clamped(v: f64, spec: &TransformSpec) -> f64 {
    inverse_from_base(v, clamped_base(v, spec), spec)
}

/// Analytic `d^2 g_tr^{-1}(v) / dv^2`.
pub fn g_tr_inverse_second_derivative(v: f64, spec: &TransformSpec) -> Result<f64> {
    let base = checked_base(v, spec)?;
    Ok(second_derivative_from_base(v, base, spec))
}

/// Bias-corrected back-transform; `s` is the within-person variance of the
/// latent variable.
pub fn g_tr_star(v: f64, spec: &TransformSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("correction variance must be >= 0, got {s}")));
    }
    let base = checked_base(v, spec)?;
    let inv = inverse_from_base(v, base, spec);
    if s == 0.0 {
        return Ok(inv);
    }
    Ok(inv + 0.5 * s * second_derivative_from_base(v, base, spec))
}

pub fn g_tr_star_clamped(v: f64, spec: &TransformSpec, s: f64) -> f64 {
    let base = clamped_base(v, spec);
    let inv = inverse_from_base(v, base, spec);
    if s == 0.0 {
        return inv;
    }
    inv + 0.5 * s * second_derivative_from_base(v, base, spec)
}

/// Lambda on the grid `0, 0.01, ..., 1` whose Box-Cox values are closest to
/// normal, measured by the normal-probability-plot correlation.
pub fn estimate_lambda(positive_values: &[f64]) -> Result<f64> {
    if positive_values.len() < MIN_LAMBDA_SAMPLE {
        return Err(Error::domain(format!(
            "lambda estimation needs at least {MIN_LAMBDA_SAMPLE} positive values, got {}",
            positive_values.len()
        )));
    }
    let mut sorted = positive_values.to_vec();
    if sorted.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
        return Err(Error::domain("lambda estimation needs finite positive values"));
    }
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::domain("lambda estimation: input has zero variance"));
    }
    let n = sorted.len() as f64;
    let quantiles: Vec<f64> = (0..sorted.len())
        .map(|i| norm_quantile((i as f64 + 1.0 - 0.375) / (n + 0.25)))
        .collect();

    let mut best = (f64::NEG_INFINITY, 0.0);
    for step in 0..=100 {
        let lambda = step as f64 / 100.0;
        let z = sorted.iter().map(|&y| boxcox(y, lambda)).collect::<Result<Vec<_>>>()?;
        let r = pearson(&z, &quantiles)?;
        if r > best.0 {
            best = (r, lambda);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, LogNormal, Normal};

    fn spec(lambda: f64, mu: f64, sigma: f64) -> TransformSpec {
        TransformSpec::new(lambda, mu, sigma).unwrap()
    }

    #[test]
    fn boxcox_examples() {
        assert_eq!(boxcox(1.0, 0.37).unwrap(), 0.0);
        assert_eq!(boxcox(1.0, 0.0).unwrap(), 0.0);
        assert!((boxcox(std::f64::consts::E, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((boxcox(4.0, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(boxcox(0.0, 0.5).is_err());
        assert!(boxcox(-1.0, 0.0).is_err());
    }

    #[test]
    fn g_tr_centering_and_step() {
        let s = spec(0.5, 2.0, 0.7);
        // boxcox(y) = mu => y = (0.5 * 2 + 1)^2 = 4
        assert!(g_tr(4.0, &s).unwrap().abs() < 1e-14);
        // boxcox(y) = mu + sigma = 2.7 => y = (1.35 + 1)^2
        let y = (0.5 * 2.7_f64 + 1.0).powi(2);
        assert!((g_tr(y, &s).unwrap() - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn inverse_special_cases() {
        let affine = spec(1.0, 0.0, SQRT_2);
        for v in [-0.5, 0.0, 2.5] {
            assert!((g_tr_inverse(v, &affine).unwrap() - (v + 1.0)).abs() < 1e-14);
        }
        let log = spec(0.0, 0.0, SQRT_2);
        for v in [-1.0, 0.0, 1.3] {
            assert!((g_tr_inverse(v, &log).unwrap() - f64::exp(v)).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        for s in [
            spec(0.0, 0.3, 0.9),
            spec(0.25, -0.1, 1.3),
            spec(0.5, 1.0, 0.5),
            spec(1.0, 2.0, 3.0),
        ] {
            for y in [0.1, 1.0, 10.0] {
                let back = g_tr_inverse(g_tr(y, &s).unwrap(), &s).unwrap();
                assert!(((back - y) / y).abs() < 1e-10, "{s:?} y={y} back={back}");
            }
        }
    }

    #[test]
    fn out_of_image_inverse() {
        let s = spec(0.5, 0.0, SQRT_2);
        // base = 0.5 * v + 1 <= 0 for v <= -2
        assert!(g_tr_inverse(-3.0, &s).is_err());
        let clamped = g_tr_inverse_clamped(-3.0, &s);
        assert!(clamped > 0.0 && clamped < 1e-15);
        assert!(g_tr_star_clamped(-3.0, &s, 1.0).is_finite());
    }

    #[test]
    fn star_examples() {
        let affine = spec(1.0, 0.4, 0.8);
        for v in [-1.0, 0.0, 1.0] {
            assert_eq!(g_tr_star(v, &affine, 3.0).unwrap(), g_tr_inverse(v, &affine).unwrap());
        }
        let log = spec(0.0, 0.0, SQRT_2);
        assert!((g_tr_star(0.0, &log, 2.0).unwrap() - 2.0).abs() < 1e-14);
        let s = spec(0.3, 0.5, 1.1);
        assert_eq!(g_tr_star(0.7, &s, 0.0).unwrap(), g_tr_inverse(0.7, &s).unwrap());
        assert!(g_tr_star(0.7, &s, -1.0).is_err());
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let h = 1e-4;
        for s in [spec(0.0, 0.2, 0.8), spec(0.25, 1.0, 1.2), spec(0.5, 0.5, 0.6)] {
            for i in 0..=20 {
                let v = -2.0 + 0.2 * i as f64;
                let fd = (g_tr_inverse(v + h, &s).unwrap() - 2.0 * g_tr_inverse(v, &s).unwrap()
                    + g_tr_inverse(v - h, &s).unwrap())
                    / (h * h);
                let an = g_tr_inverse_second_derivative(v, &s).unwrap();
                assert!(((an - fd) / an).abs() < 1e-5, "{s:?} v={v} an={an} fd={fd}");
            }
        }
    }

    #[test]
    fn star_exceeds_inverse_for_convex_inverse() {
        for lambda in [0.0, 0.2, 0.6, 0.95] {
            let s = spec(lambda, 0.5, 0.9);
            for i in 0..=40 {
                let v = -2.0 + 0.1 * i as f64;
                assert!(g_tr_star(v, &s, 0.8).unwrap() >= g_tr_inverse(v, &s).unwrap());
            }
        }
    }

    #[test]
    fn lambda_for_lognormal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = LogNormal::new(0.5, 0.8).unwrap();
        let xs: Vec<f64> = (0..2000).map(|_| d.sample(&mut rng)).collect();
        let l = estimate_lambda(&xs).unwrap();
        assert!((0.0..=0.1).contains(&l), "lambda = {l}");
    }

    #[test]
    fn lambda_for_shifted_normal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = Normal::new(10.0, 3.0).unwrap();
        let xs: Vec<f64> = d.sample_iter(&mut rng).filter(|&y| y > 0.0).take(2000).collect();
        let l = estimate_lambda(&xs).unwrap();
        assert!((0.85..=1.0).contains(&l), "lambda = {l}");
    }

    #[test]
    fn lambda_rejects_degenerate_input() {
        assert!(estimate_lambda(&[3.0; 50]).is_err());
        assert!(estimate_lambda(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn fit_freezes_moments() {
        let ys = [1.0, 2.0, 4.0, 8.0];
        let s = TransformSpec::fit(&ys, 0.0).unwrap();
        let logs: Vec<f64> = ys.iter().map(|y: &f64| y.ln()).collect();
        assert!((s.mu - mean(&logs)).abs() < 1e-14);
        assert!((s.sigma - sample_sd(&logs)).abs() < 1e-14);
        let w: Vec<f64> = ys.iter().map(|&y| g_tr(y, &s).unwrap()).collect();
        assert!(mean(&w).abs() < 1e-12);
        assert!((sample_sd(&w) - SQRT_2).abs() < 1e-12);
    }
}
