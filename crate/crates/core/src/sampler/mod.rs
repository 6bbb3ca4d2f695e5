//! Metropolis-within-Gibbs sampler for the latent-variable model.

mod chain;
mod config;
mod truncnorm;

pub use chain::{Chain, GaussianConditionals};
pub use config::{Priors, ProposalConfig, SamplerConfig};
pub use truncnorm::{sample_sign_truncated, standard_normal_above};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::RecallDataset;
use crate::error::{Error, Result};
use crate::model::{complete_data_logdensity, ModelParams, VariableKind};
use crate::stats::norm_quantile;
use crate::transform::TransformSpec;

/// Box-Cox transform estimated from the positive values of every transformed variable.
pub fn estimate_transforms(data: &RecallDataset) -> Result<Vec<TransformSpec>> {
    let names = data.layout.column_names();
    (0..data.layout.n_transformed())
        .map(|t| {
            TransformSpec::estimate(&data.positive_values(t)).map_err(|e| {
                Error::validation(format!(
                    "transform for `{}`: {e}",
                    names[data.layout.transformed_variable(t)]
                ))
            })
        })
        .collect()
}

/// Starting parameters: indicator intercepts at the probit of the observed
/// consumption rate, all other effects zero, `Sigma_u = I / 2`, `Sigma_eps = I`.
pub fn initial_params(data: &RecallDataset, transforms: Vec<TransformSpec>) -> Result<ModelParams> {
    let layout = data.layout.clone();
    let p = layout.p();
    let q = data.design.q();
    let mut beta = DMatrix::<f64>::zeros(p, q);
    let n = data.n_recalls() as f64;
    for j in 0..p {
        if let VariableKind::Indicator(_) = layout.kind(j) {
            let consumed = data
                .persons
                .iter()
                .flat_map(|pr| pr.recalls.iter())
                .filter(|r| r.values[j] == 1.0)
                .count() as f64;
            let rate = ((consumed + 0.5) / (n + 1.0)).clamp(1e-3, 1.0 - 1e-3);
            beta[(j, 0)] = norm_quantile(rate);
        }
    }
    let params = ModelParams {
        layout,
        design: data.design.clone(),
        beta,
        sigma_u: DMatrix::identity(p, p) * 0.5,
        sigma_eps: DMatrix::identity(p, p),
        transforms,
    };
    params.validate()?;
    Ok(params)
}

/// Per-draw monitoring values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub log_density: f64,
    /// Mean of `log_density` over the draws so far.
    pub running_mean_log_density: f64,
    pub trace_sigma_u: f64,
    pub trace_sigma_eps: f64,
    pub beta_norm: f64,
}

#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub draws: Vec<ModelParams>,
    pub trace: Vec<TraceRow>,
    /// Post-burn-in acceptance rate of each `Sigma_eps` row block.
    pub acceptance: Vec<f64>,
    pub config: SamplerConfig,
}

impl PosteriorDraws {
    pub fn posterior_mean(&self) -> Result<ModelParams> {
        ModelParams::mean_of(&self.draws)
    }

    /// Elementwise posterior standard deviation of the fixed effects.
    pub fn beta_sd(&self) -> Result<DMatrix<f64>> {
        let mean = self.posterior_mean()?.beta;
        let n = self.draws.len();
        if n < 2 {
            return Err(Error::validation("need at least two draws for a standard deviation"));
        }
        let mut var = DMatrix::<f64>::zeros(mean.nrows(), mean.ncols());
        for d in &self.draws {
            let diff = &d.beta - &mean;
            var += diff.component_mul(&diff);
        }
        Ok((var / (n - 1) as f64).map(f64::sqrt))
    }
}

/// Run the sampler from `initial`; deterministic given the config seed.
pub fn run_chain(data: &RecallDataset, initial: ModelParams, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let mut chain = Chain::new(data, initial, config.clone())?;
    let mut draws = Vec::with_capacity(config.n_draws());
    let mut trace = Vec::with_capacity(config.n_draws());
    for t in 0..config.iterations {
        if t == config.burn_in {
            chain.reset_acceptance();
        }
        chain.sweep(t)?;
        if t >= config.burn_in && (t - config.burn_in + 1).is_multiple_of(config.thin) {
            let log_density = complete_data_logdensity(&chain.params, &chain.latent, data)
                .map_err(|e| Error::numerical(format!("iteration {t}, monitoring: {e}")))?;
            let k = trace.len() as f64;
            let previous = trace.last().map_or(0.0, |r: &TraceRow| r.running_mean_log_density);
            trace.push(TraceRow {
                iteration: t + 1,
                log_density,
                running_mean_log_density: previous + (log_density - previous) / (k + 1.0),
                trace_sigma_u: chain.params.sigma_u.trace(),
                trace_sigma_eps: chain.params.sigma_eps.trace(),
                beta_norm: chain.params.beta.norm(),
            });
            draws.push(chain.params.clone());
        }
    }
    Ok(PosteriorDraws {
        draws,
        trace,
        acceptance: chain.acceptance_rates(),
        config: config.clone(),
    })
}
