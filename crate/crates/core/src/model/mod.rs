//! The multivariate latent-variable model: variable layout, parameters, the
//! structured within-person covariance, latent state and the complete-data
//! log-density.

mod design;
mod latent;
mod layout;
mod params;
mod sigma_eps;

pub use design::CovariateDesign;
pub use latent::{complete_data_logdensity, consumption_probability, LatentState};
pub use layout::{VariableKind, VariableLayout};
pub use params::{ModelParams, PARAMS_SCHEMA};
pub use sigma_eps::{build_cholesky, build_sigma_eps, check_structure, EpsCholParam, STRUCTURE_TOL};
