use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Priors {
    /// Prior variance of every fixed effect, `N(0, beta_variance)`.
    pub beta_variance: f64,
    /// Inverse-Wishart degrees of freedom for `Sigma_u`; `p + 2` when absent.
    pub sigma_u_df: Option<f64>,
    /// Inverse-Wishart scale is `sigma_u_scale * I`.
    pub sigma_u_scale: f64,
    /// Prior variance of each unconstrained `Sigma_eps` parameter.
    pub theta_variance: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            beta_variance: 1e4,
            sigma_u_df: None,
            sigma_u_scale: 1.0,
            theta_variance: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalConfig {
    /// Starting random-walk step for every row block of `Sigma_eps`.
    pub initial_scale: f64,
    /// Tune step sizes during burn-in towards `target_acceptance`.
    pub adapt: bool,
    pub target_acceptance: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            initial_scale: 0.1,
            adapt: true,
            target_acceptance: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Use survey weights in the parameter updates.
    pub use_weights: bool,
    pub priors: Priors,
    pub proposal: ProposalConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            thin: 5,
            seed: 1,
            use_weights: true,
            priors: Priors::default(),
            proposal: ProposalConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be >= 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::validation(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::validation("thin must be >= 1"));
        }
        let pr = &self.priors;
        if !(pr.beta_variance > 0.0 && pr.beta_variance.is_finite()) {
            return Err(Error::validation("beta_variance must be positive and finite"));
        }
        if !(pr.sigma_u_scale > 0.0 && pr.sigma_u_scale.is_finite()) {
            return Err(Error::validation("sigma_u_scale must be positive and finite"));
        }
        if !(pr.theta_variance > 0.0 && pr.theta_variance.is_finite()) {
            return Err(Error::validation("theta_variance must be positive and finite"));
        }
        let df = self.sigma_u_df(p);
        if !(df > p as f64 - 1.0) {
            return Err(Error::validation(format!(
                "sigma_u_df must exceed p - 1 = {}, got {df}",
                p - 1
            )));
        }
        let pc = &self.proposal;
        if !(pc.initial_scale >= 0.0 && pc.initial_scale.is_finite()) {
            return Err(Error::validation("initial proposal scale must be finite and >= 0"));
        }
        if !(pc.target_acceptance > 0.0 && pc.target_acceptance < 1.0) {
            return Err(Error::validation("target_acceptance must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn sigma_u_df(&self, p: usize) -> f64 {
        self.priors.sigma_u_df.unwrap_or(p as f64 + 2.0)
    }

    /// Number of retained draws.
    pub fn n_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SamplerConfig::default().validate(19).unwrap();
        assert_eq!(SamplerConfig::default().n_draws(), 800);
    }

    #[test]
    fn rejects_inconsistent_settings() {
        let bad = SamplerConfig {
            burn_in: 10,
            iterations: 10,
            ..SamplerConfig::default()
        };
        assert!(bad.validate(5).is_err());
        let bad = SamplerConfig {
            thin: 0,
            ..SamplerConfig::default()
        };
        assert!(bad.validate(5).is_err());
        let mut bad = SamplerConfig::default();
        bad.priors.sigma_u_df = Some(3.0);
        assert!(bad.validate(5).is_err());
    }

    #[test]
    fn json_rejects_unknown_keys() {
        assert!(serde_json::from_str::<SamplerConfig>(r#"{"iterations": 10, "burn": 2}"#).is_err());
        let c: SamplerConfig = serde_json::from_str(r#"{"iterations": 10, "burn_in": 2}"#).unwrap();
        assert_eq!(c.n_draws(), 1);
    }
}
