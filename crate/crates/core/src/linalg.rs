//! Dense linear-algebra and multivariate-normal helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::stats::LN_2PI;

pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::numerical(format!("{what} is not positive definite")))
}

pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let inv = cholesky(m, what)?.inverse();
    Ok(symmetrize(&inv))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

/// Log density of `N(0, Sigma)` at `x` given the Cholesky factor of `Sigma`.
pub fn mvn_logpdf_zero_mean(x: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let p = x.len() as f64;
    let l = chol.l();
    let z = l
        .solve_lower_triangular(x)
        .expect("Cholesky factor has a positive diagonal");
    -0.5 * (p * LN_2PI + log_det_from_cholesky(chol) + z.norm_squared())
}

pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Draw `mean + L z` for `z ~ N(0, I)`, where `L` is a lower Cholesky factor.
pub fn sample_mvn_with_factor<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
) -> DVector<f64> {
    let z = standard_normal_vector(rng, mean.len());
    mean + factor * z
}

/// Lower factor `L` with `L L^T = m` for a positive semidefinite `m`; zero
/// rows are allowed where the matrix is singular.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol.l());
    }
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale) {
        return Err(Error::numerical("covariance matrix is not positive semidefinite"));
    }
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals))
}

/// Draw from `N(Q^{-1} b, Q^{-1})` given a positive definite precision `Q`.
pub fn sample_from_precision<R: Rng + ?Sized>(
    rng: &mut R,
    precision: &DMatrix<f64>,
    b: &DVector<f64>,
    what: &str,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let chol = cholesky(precision, what)?;
    let mean = chol.solve(b);
    let z = standard_normal_vector(rng, b.len());
    // L^T x = z gives x ~ N(0, Q^{-1}).
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::numerical(format!("{what}: singular factor")))?;
    Ok((&mean + noise, mean))
}

/// Wishart draw with `df` degrees of freedom and scale `scale` via the
/// Bartlett decomposition.
pub fn sample_wishart<R: Rng + ?Sized>(rng: &mut R, df: f64, scale: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if !(df > p as f64 - 1.0) {
        return Err(Error::domain(format!(
            "Wishart needs df > p - 1, got df = {df}, p = {p}"
        )));
    }
    let l = cholesky(scale, "Wishart scale")?.l();
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::numerical(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    Ok(symmetrize(&(&la * la.transpose())))
}

/// Inverse-Wishart draw: if `W ~ Wishart(df, scale^{-1})` then `W^{-1} ~ IW(df, scale)`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(rng: &mut R, df: f64, scale: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale_inv = spd_inverse(scale, "inverse-Wishart scale")?;
    let w = sample_wishart(rng, df, &scale_inv)?;
    spd_inverse(&w, "Wishart draw")
}
