//! Unconstrained parameterization of the within-person covariance.
//!
//! `Sigma_eps = L L^T` with `L` lower triangular. Every indicator row of `L`
//! is scaled to unit length, so indicator variances are exactly one. For each
//! episodic food the entry of its amount row under the indicator diagonal is
//! solved so that the two rows are orthogonal, which makes the
//! indicator/amount covariance zero. All remaining entries are free and the
//! free diagonal entries are `exp(theta)`.
//!
//! Slots per row `i` (0-based), in order:
//! - indicator row: `i` off-diagonal entries; raw diagonal fixed at 1;
//! - amount row: `i - 1` off-diagonal entries (the paired-indicator column is
//!   solved), then the log diagonal;
//! - any other row: `i` off-diagonal entries, then the log diagonal.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::layout::{VariableKind, VariableLayout};
use crate::error::{Error, Result};

/// Tolerance used when checking that a supplied matrix carries the structure.
pub const STRUCTURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpsCholParam(Vec<f64>);

fn row_slots(layout: &VariableLayout, i: usize) -> usize {
    match layout.kind(i) {
        VariableKind::Indicator(_) | VariableKind::Amount(_) => i,
        VariableKind::Daily(_) | VariableKind::Energy => i + 1,
    }
}

impl EpsCholParam {
    pub fn dim(layout: &VariableLayout) -> usize {
        let p = layout.p();
        p * (p + 1) / 2 - 2 * layout.n_episodic()
    }

    /// The parameter whose covariance is the identity.
    pub fn identity(layout: &VariableLayout) -> Self {
        Self(vec![0.0; Self::dim(layout)])
    }

    pub fn new(values: Vec<f64>, layout: &VariableLayout) -> Result<Self> {
        let dim = Self::dim(layout);
        if values.len() != dim {
            return Err(Error::validation(format!(
                "covariance parameter has {} entries, layout needs {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("covariance parameter must be finite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Parameter ranges belonging to each row of `L`; empty rows are skipped.
    pub fn row_blocks(layout: &VariableLayout) -> Vec<Range<usize>> {
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 0..layout.p() {
            let n = row_slots(layout, i);
            if n > 0 {
                blocks.push(start..start + n);
            }
            start += n;
        }
        blocks
    }

    /// Exact inverse of [`build_sigma_eps`] for a matrix that carries the structure.
    pub fn from_sigma(sigma: &DMatrix<f64>, layout: &VariableLayout) -> Result<Self> {
        check_structure(sigma, layout, STRUCTURE_TOL)?;
        let l = crate::linalg::cholesky(sigma, "within-person covariance")?.l();
        let mut theta = Vec::with_capacity(Self::dim(layout));
        for i in 0..layout.p() {
            match layout.kind(i) {
                VariableKind::Indicator(_) => {
                    theta.extend((0..i).map(|k| l[(i, k)] / l[(i, i)]));
                }
                VariableKind::Amount(_) => {
                    theta.extend((0..i - 1).map(|k| l[(i, k)]));
                    theta.push(l[(i, i)].ln());
                }
                VariableKind::Daily(_) | VariableKind::Energy => {
                    theta.extend((0..i).map(|k| l[(i, k)]));
                    theta.push(l[(i, i)].ln());
                }
            }
        }
        Self::new(theta, layout)
    }
}

/// Lower-triangular factor `L` for `theta`.
pub fn build_cholesky(theta: &EpsCholParam, layout: &VariableLayout) -> Result<DMatrix<f64>> {
    let p = layout.p();
    let dim = EpsCholParam::dim(layout);
    if theta.0.len() != dim {
        return Err(Error::validation(format!(
            "covariance parameter has {} entries, layout needs {dim}",
            theta.0.len()
        )));
    }
    let t = &theta.0;
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut pos = 0;
    for i in 0..p {
        match layout.kind(i) {
            VariableKind::Indicator(_) => {
                for k in 0..i {
                    l[(i, k)] = t[pos + k];
                }
                l[(i, i)] = 1.0;
                pos += i;
                let norm = l.row(i).norm();
                for k in 0..=i {
                    l[(i, k)] /= norm;
                }
            }
            VariableKind::Amount(_) => {
                let ind = i - 1;
                for k in 0..ind {
                    l[(i, k)] = t[pos + k];
                }
                l[(i, i)] = t[pos + ind].exp();
                pos += i;
                let partial: f64 = (0..ind).map(|k| l[(i, k)] * l[(ind, k)]).sum();
                l[(i, ind)] = -partial / l[(ind, ind)];
            }
            VariableKind::Daily(_) | VariableKind::Energy => {
                for k in 0..i {
                    l[(i, k)] = t[pos + k];
                }
                l[(i, i)] = t[pos + i].exp();
                pos += i + 1;
            }
        }
    }
    debug_assert_eq!(pos, dim);
    Ok(l)
}

/// Structured within-person covariance for `theta`.
pub fn build_sigma_eps(theta: &EpsCholParam, layout: &VariableLayout) -> Result<DMatrix<f64>> {
    let l = build_cholesky(theta, layout)?;
    let p = layout.p();
    let mut sigma = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let v: f64 = (0..=j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    // The construction makes these exact up to rounding; pin them.
    for l_idx in 0..layout.n_episodic() {
        let ind = layout.indicator(l_idx);
        let amt = layout.amount(l_idx);
        sigma[(ind, ind)] = 1.0;
        sigma[(ind, amt)] = 0.0;
        sigma[(amt, ind)] = 0.0;
    }
    Ok(sigma)
}

/// Check symmetry, unit indicator variances and zero indicator/amount covariances.
pub fn check_structure(sigma: &DMatrix<f64>, layout: &VariableLayout, tol: f64) -> Result<()> {
    let p = layout.p();
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::validation(format!(
            "within-person covariance must be {p}x{p}, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    for i in 0..p {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > tol {
                return Err(Error::validation(format!(
                    "within-person covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    for l in 0..layout.n_episodic() {
        let ind = layout.indicator(l);
        let amt = layout.amount(l);
        if (sigma[(ind, ind)] - 1.0).abs() > tol {
            return Err(Error::validation(format!(
                "indicator variance at index {ind} must be 1, got {}",
                sigma[(ind, ind)]
            )));
        }
        if sigma[(ind, amt)].abs() > tol {
            return Err(Error::validation(format!(
                "indicator/amount covariance at ({ind}, {amt}) must be 0, got {}",
                sigma[(ind, amt)]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use crate::scoring::HeiComponent::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p5() -> VariableLayout {
        VariableLayout::new(vec![TotalFruit, Milk], vec![]).unwrap()
    }

    fn random_theta(rng: &mut ChaCha8Rng, layout: &VariableLayout, scale: f64) -> EpsCholParam {
        let v = (0..EpsCholParam::dim(layout))
            .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        EpsCholParam::new(v, layout).unwrap()
    }

    #[test]
    fn dimension_counts() {
        assert_eq!(EpsCholParam::dim(&p5()), 15 - 4);
        assert_eq!(EpsCholParam::dim(&VariableLayout::full()), 190 - 12);
        let blocks = EpsCholParam::row_blocks(&p5());
        assert_eq!(blocks.iter().map(|b| b.len()).sum::<usize>(), EpsCholParam::dim(&p5()));
    }

    #[test]
    fn zero_theta_gives_identity() {
        for layout in [p5(), VariableLayout::full()] {
            let s = build_sigma_eps(&EpsCholParam::identity(&layout), &layout).unwrap();
            assert_eq!(s, DMatrix::identity(layout.p(), layout.p()));
        }
    }

    #[test]
    fn random_theta_respects_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Wide draws at p = 19 give condition numbers beyond 1/eps.
        for (layout, scale) in [(p5(), 2.0), (VariableLayout::full(), 0.5)] {
            for _ in 0..200 {
                let theta = random_theta(&mut rng, &layout, scale);
                let s = build_sigma_eps(&theta, &layout).unwrap();
                check_structure(&s, &layout, 1e-12).unwrap();
                assert!(min_eigenvalue(&s) > 0.0);
            }
        }
    }

    #[test]
    fn p5_zero_one_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let layout = p5();
        let s = build_sigma_eps(&random_theta(&mut rng, &layout, 1.0), &layout).unwrap();
        // Fixed cells: (1,1)=1, (1,2)=0, (3,3)=1, (3,4)=0 in 1-based indexing.
        assert_eq!(s[(0, 0)], 1.0);
        assert_eq!(s[(2, 2)], 1.0);
        assert_eq!(s[(0, 1)], 0.0);
        assert_eq!(s[(1, 0)], 0.0);
        assert_eq!(s[(2, 3)], 0.0);
        assert_eq!(s[(3, 2)], 0.0);
        // Free cells are generically nonzero.
        for (i, j) in [(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4), (2, 4), (3, 4)] {
            assert!(s[(i, j)].abs() > 1e-8, "({i},{j})");
        }
        for i in [1, 3, 4] {
            assert!(s[(i, i)] > 0.0 && s[(i, i)] != 1.0);
        }
    }

    #[test]
    fn from_sigma_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (layout, scale) in [(p5(), 1.5), (VariableLayout::full(), 0.5)] {
            for _ in 0..50 {
                let theta = random_theta(&mut rng, &layout, scale);
                let s = build_sigma_eps(&theta, &layout).unwrap();
                let back = EpsCholParam::from_sigma(&s, &layout).unwrap();
                let s2 = build_sigma_eps(&back, &layout).unwrap();
                assert!((&s - &s2).norm() < 1e-9);
                for (a, b) in theta.values().iter().zip(back.values()) {
                    assert!((a - b).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn from_sigma_rejects_unstructured() {
        let layout = p5();
        let mut s = DMatrix::identity(5, 5);
        s[(0, 0)] = 2.0;
        assert!(EpsCholParam::from_sigma(&s, &layout).is_err());
        let mut s = DMatrix::identity(5, 5);
        s[(0, 1)] = 0.3;
        s[(1, 0)] = 0.3;
        assert!(EpsCholParam::from_sigma(&s, &layout).is_err());
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let layout = p5();
        assert!(EpsCholParam::new(vec![0.0; 3], &layout).is_err());
    }
}
