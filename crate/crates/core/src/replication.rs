//! Balanced repeated replication (BRR) with Fay's adjustment.

use rayon::prelude::*;

use crate::data::SurveyDesign;
use crate::error::{Error, Result};

/// Sylvester Hadamard matrix of the given power-of-two order, as rows of +-1.
pub fn hadamard(order: usize) -> Result<Vec<Vec<i8>>> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::domain(format!(
            "Hadamard order must be a power of two, got {order}"
        )));
    }
    let mut h = vec![vec![1i8]];
    while h.len() < order {
        let n = h.len();
        let mut next = vec![vec![0i8; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = h[i][j];
                next[i][j + n] = h[i][j];
                next[i + n][j] = h[i][j];
                next[i + n][j + n] = -h[i][j];
            }
        }
        h = next;
    }
    Ok(h)
}

/// Replicate weights for a stratified two-PSU design.
///
/// Stratum `h` uses Hadamard column `h + 1`; the all-ones first column is
/// skipped so every stratum column sums to zero over the replicates. The
/// order is therefore the smallest power of two that is at least
/// `strata + 1` (and at least 4).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateWeights {
    /// `weights[r][i]`: weight of person `i` in replicate `r`.
    pub weights: Vec<Vec<f64>>,
    pub fay: f64,
}

impl ReplicateWeights {
    pub fn build(design: &SurveyDesign, fay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fay) {
            return Err(Error::validation(format!(
                "Fay coefficient must lie in [0, 1), got {fay}"
            )));
        }
        let order = replicate_count(design.n_strata());
        let h = hadamard(order)?;
        let positions: Vec<(usize, usize)> = (0..design.units().len()).map(|i| design.position(i)).collect();
        let weights = h
            .iter()
            .map(|row| {
                design
                    .units()
                    .iter()
                    .zip(&positions)
                    .map(|(unit, &(stratum, which))| {
                        let first_doubled = row[stratum + 1] > 0;
                        let doubled = first_doubled == (which == 0);
                        unit.weight * if doubled { 2.0 - fay } else { fay }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { weights, fay })
    }

    pub fn n_replicates(&self) -> usize {
        self.weights.len()
    }
}

/// Number of replicates used for `n_strata` strata.
pub fn replicate_count(n_strata: usize) -> usize {
    (n_strata + 1).next_power_of_two().max(4)
}

/// `sqrt(sum_r (theta_r - theta)^2 / (R (1 - f)^2))`.
pub fn brr_se(full: f64, replicates: &[f64], fay: f64) -> f64 {
    let r = replicates.len() as f64;
    let ss: f64 = replicates.iter().map(|t| (t - full) * (t - full)).sum();
    (ss / (r * (1.0 - fay) * (1.0 - fay))).sqrt()
}

/// Full-sample values and BRR standard errors of a vector-valued statistic
/// of the person weights. Replicates run in parallel; the reduction order is fixed.
pub fn replicate_statistic<F>(
    full_weights: &[f64],
    replicates: &ReplicateWeights,
    statistic: F,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let full = statistic(full_weights)?;
    let reps = replicates
        .weights
        .par_iter()
        .enumerate()
        .map(|(r, w)| {
            let v = statistic(w).map_err(|e| Error::numerical(format!("replicate {}: {e}", r + 1)))?;
            if v.len() != full.len() {
                return Err(Error::numerical(format!(
                    "replicate {}: statistic returned {} values, full sample {}",
                    r + 1,
                    v.len(),
                    full.len()
                )));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let se = (0..full.len())
        .map(|k| {
            let column: Vec<f64> = reps.iter().map(|v| v[k]).collect();
            brr_se(full[k], &column, replicates.fay)
        })
        .collect();
    Ok((full, se))
}
