//! JSON run configuration shared by the command-line tools. Every block is
//! optional; unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::defaults::{FAY_FACTOR, LOW_SCORE_THRESHOLD, MC_DRAWS, WEEKEND_SHARE};
use crate::error::{Error, Result};
use crate::population::PopulationConfig;
use crate::sampler::SamplerConfig;
use crate::simulate::{RecallPlan, WeightScheme};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub simulate: SimulateSettings,
    pub fit: SamplerConfig,
    pub estimate: EstimateSettings,
    pub brr: BrrSettings,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub preset: String,
    pub seed: u64,
    pub strata: usize,
    pub persons_per_psu: usize,
    pub weights: WeightScheme,
    pub recalls: RecallPlan,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            preset: "p5".to_string(),
            seed: 1,
            strata: 25,
            persons_per_psu: 10,
            weights: WeightScheme::Equal,
            recalls: RecallPlan::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSettings {
    pub n_draws: usize,
    pub seed: u64,
    pub weekend_share: f64,
    pub threshold: f64,
    /// Pick a posterior draw per Monte Carlo draw instead of using the posterior mean.
    pub mix_draws: bool,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        Self {
            n_draws: MC_DRAWS,
            seed: 1,
            weekend_share: WEEKEND_SHARE,
            threshold: LOW_SCORE_THRESHOLD,
            mix_draws: false,
        }
    }
}

impl EstimateSettings {
    pub fn population(&self) -> PopulationConfig {
        PopulationConfig {
            n_draws: self.n_draws,
            seed: self.seed,
            weekend_share: self.weekend_share,
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrrSettings {
    pub fay: f64,
    /// Refit the model for every replicate; otherwise only the population
    /// Monte Carlo is re-weighted with the parameters held fixed, which
    /// leaves parameter uncertainty out of the standard errors.
    pub refit: bool,
}

impl Default for BrrSettings {
    fn default() -> Self {
        Self {
            fay: FAY_FACTOR,
            refit: true,
        }
    }
}
