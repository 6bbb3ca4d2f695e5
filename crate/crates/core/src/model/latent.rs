use nalgebra::DVector;

use super::layout::VariableKind;
use super::params::ModelParams;
use crate::data::RecallDataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, mvn_logpdf_zero_mean};
use crate::stats::norm_cdf;
use crate::transform::{g_tr, log_jacobian};

/// Latent vectors of every recall plus the person-level random effects.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    /// `w[i][k]` is the latent p-vector of recall `k` of person `i`.
    pub w: Vec<Vec<Vec<f64>>>,
    /// `u[i]` is the random-effect p-vector of person `i`.
    pub u: Vec<Vec<f64>>,
}

impl LatentState {
    /// Starting state: indicator latents at +-0.5 on the observed side of
    /// zero, observed amounts transformed, unobserved amounts at the linear
    /// predictor, random effects at zero.
    pub fn initialize(params: &ModelParams, data: &RecallDataset) -> Result<Self> {
        let p = params.p();
        let layout = &params.layout;
        let mut w = Vec::with_capacity(data.n_persons());
        for person in &data.persons {
            let mut recalls = Vec::with_capacity(person.recalls.len());
            for r in &person.recalls {
                let x = data.design_row(person, r);
                let mut v = vec![0.0; p];
                for j in 0..p {
                    v[j] = match layout.kind(j) {
                        VariableKind::Indicator(_) => {
                            if r.values[j] == 1.0 {
                                0.5
                            } else {
                                -0.5
                            }
                        }
                        VariableKind::Amount(l) if r.values[layout.indicator(l)] == 0.0 => {
                            params.linear_predictor(j, &x)
                        }
                        _ => g_tr(r.values[j], params.transform_for(j).expect("transformed"))?,
                    };
                }
                recalls.push(v);
            }
            w.push(recalls);
        }
        Ok(Self {
            w,
            u: vec![vec![0.0; p]; data.n_persons()],
        })
    }

    /// Check the sign and observed-value invariants against the data.
    pub fn check_consistency(&self, params: &ModelParams, data: &RecallDataset) -> Result<()> {
        let layout = &params.layout;
        for (i, person) in data.persons.iter().enumerate() {
            for (k, r) in person.recalls.iter().enumerate() {
                let w = &self.w[i][k];
                for j in 0..layout.p() {
                    match layout.kind(j) {
                        VariableKind::Indicator(_) => {
                            if (w[j] > 0.0) != (r.values[j] == 1.0) {
                                return Err(Error::numerical(format!(
                                    "person {} recall {}: indicator latent {j} has the wrong sign",
                                    person.id, r.index
                                )));
                            }
                        }
                        VariableKind::Amount(l) if r.values[layout.indicator(l)] == 0.0 => {}
                        _ => {
                            let expected = g_tr(r.values[j], params.transform_for(j).expect("transformed"))?;
                            if w[j] != expected {
                                return Err(Error::numerical(format!(
                                    "person {} recall {}: observed latent {j} drifted",
                                    person.id, r.index
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Survey-weighted complete-data log-density of latents and random effects,
/// including the Jacobian of the transform for every observed amount.
pub fn complete_data_logdensity(params: &ModelParams, latent: &LatentState, data: &RecallDataset) -> Result<f64> {
    let p = params.p();
    let layout = &params.layout;
    let chol_u = cholesky(&params.sigma_u, "sigma_u")?;
    let chol_e = cholesky(&params.sigma_eps, "sigma_eps")?;
    let weights = data.normalized_weights();
    let mut total = 0.0;
    for (i, person) in data.persons.iter().enumerate() {
        let u = DVector::from_column_slice(&latent.u[i]);
        let mut lp = mvn_logpdf_zero_mean(&u, &chol_u);
        for (k, r) in person.recalls.iter().enumerate() {
            let x = data.design_row(person, r);
            let resid = DVector::from_fn(p, |j, _| {
                latent.w[i][k][j] - params.linear_predictor(j, &x) - latent.u[i][j]
            });
            lp += mvn_logpdf_zero_mean(&resid, &chol_e);
            for j in 0..p {
                let observed = match layout.kind(j) {
                    VariableKind::Indicator(_) => false,
                    VariableKind::Amount(l) => r.values[layout.indicator(l)] == 1.0,
                    VariableKind::Daily(_) | VariableKind::Energy => true,
                };
                if observed {
                    lp += log_jacobian(r.values[j], params.transform_for(j).expect("transformed"))?;
                }
            }
        }
        total += weights[i] * lp;
    }
    Ok(total)
}

/// Probability that episodic food `l` is consumed on a day with covariates
/// `x`, given the person's random effects `u`.
pub fn consumption_probability(params: &ModelParams, l: usize, x: &[f64], u: &[f64]) -> f64 {
    let j = params.layout.indicator(l);
    norm_cdf(params.linear_predictor(j, x) + u[j])
}
