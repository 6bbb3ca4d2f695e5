//! Synthetic 24-hour recall surveys drawn from known model parameters.

mod presets;

pub use presets::{restrict, Preset, WEEKEND_PROB};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DesignUnit, Person, Recall, RecallDataset, SurveyDesign};
use crate::error::{Error, Result};
use crate::linalg::{psd_factor, standard_normal_vector};
use crate::model::{ModelParams, VariableKind};
use crate::stats::mix_seed;
use crate::transform::g_tr_inverse_clamped;

/// Smallest positive amount emitted by the simulator.
pub const AMOUNT_FLOOR: f64 = 1e-6;

pub const BASE_WEIGHT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightScheme {
    Equal,
    /// Lognormal weights with mean [`BASE_WEIGHT`] and the given coefficient of variation.
    Lognormal {
        cv: f64,
    },
}

pub fn make_design(n_strata: usize, persons_per_psu: usize, scheme: WeightScheme, seed: u64) -> Result<SurveyDesign> {
    if n_strata == 0 || persons_per_psu == 0 {
        return Err(Error::validation(
            "design needs at least one stratum and one person per PSU",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lognormal = match scheme {
        WeightScheme::Equal => None,
        WeightScheme::Lognormal { cv } => {
            if !(cv > 0.0 && cv.is_finite()) {
                return Err(Error::validation(format!("weight CV must be positive, got {cv}")));
            }
            let s2 = (1.0 + cv * cv).ln();
            Some(LogNormal::new(BASE_WEIGHT.ln() - s2 / 2.0, s2.sqrt()).map_err(|e| Error::validation(e.to_string()))?)
        }
    };
    let mut units = Vec::with_capacity(n_strata * 2 * persons_per_psu);
    for h in 0..n_strata {
        for psu in 0..2 {
            for _ in 0..persons_per_psu {
                let weight = lognormal.as_ref().map_or(BASE_WEIGHT, |d| d.sample(&mut rng));
                units.push(DesignUnit {
                    person_id: format!("P{:06}", units.len() + 1),
                    stratum: h as u32 + 1,
                    psu: psu + 1,
                    weight,
                });
            }
        }
    }
    SurveyDesign::new(units)
}

/// Source of person-level covariates and day types.
pub trait CovariateGenerator: Sync {
    /// Person covariates in the order of the parameters' covariate design.
    fn person<R: Rng>(&self, rng: &mut R) -> Vec<f64>;
    fn weekend<R: Rng>(&self, rng: &mut R) -> bool;
}

/// Gender-like binary (p = 0.5), standardized age uniform on [-1, 1], and
/// weekend days with probability 3/7.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultCovariates;

impl CovariateGenerator for DefaultCovariates {
    fn person<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let female = f64::from(u8::from(rng.random::<f64>() < 0.5));
        let age = 2.0 * rng.random::<f64>() - 1.0;
        vec![female, age]
    }

    fn weekend<R: Rng>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < WEEKEND_PROB
    }
}

/// Every person covariate fixed at the given values.
#[derive(Debug, Clone)]
pub struct FixedCovariates {
    pub values: Vec<f64>,
    pub weekend_prob: f64,
}

impl CovariateGenerator for FixedCovariates {
    fn person<R: Rng>(&self, _rng: &mut R) -> Vec<f64> {
        self.values.clone()
    }

    fn weekend<R: Rng>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.weekend_prob
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecallPlan {
    pub recalls_per_person: u32,
    /// Chance that each recall after the first is actually collected.
    pub later_recall_prob: f64,
}

impl Default for RecallPlan {
    fn default() -> Self {
        Self {
            recalls_per_person: 2,
            later_recall_prob: 1.0,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of a person's private random stream.
pub fn person_seed(master: u64, person_id: &str) -> u64 {
    mix_seed(master, fnv1a(person_id.as_bytes()))
}

/// Draw a recall dataset: `U ~ N(0, Sigma_u)` per person,
/// `eps ~ N(0, Sigma_eps)` per recall, `W = X beta + U + eps`; consumption is
/// `W_indicator > 0`, amounts and daily values are back-transformed latents.
pub fn simulate_dataset<G: CovariateGenerator>(
    params: &ModelParams,
    design: &SurveyDesign,
    covariates: &G,
    plan: RecallPlan,
    seed: u64,
) -> Result<RecallDataset> {
    params.validate()?;
    if plan.recalls_per_person == 0 {
        return Err(Error::validation("recalls_per_person must be >= 1"));
    }
    if !(0.0..=1.0).contains(&plan.later_recall_prob) {
        return Err(Error::validation("later_recall_prob must lie in [0, 1]"));
    }
    let factor_u = psd_factor(&params.sigma_u)?;
    let factor_e = psd_factor(&params.sigma_eps)?;
    let layout = &params.layout;
    let p = layout.p();

    let persons = design
        .units()
        .par_iter()
        .map(|unit| {
            let mut rng = ChaCha8Rng::seed_from_u64(person_seed(seed, &unit.person_id));
            let person_covs = covariates.person(&mut rng);
            let u = &factor_u * standard_normal_vector(&mut rng, p);
            let mut recalls = Vec::with_capacity(plan.recalls_per_person as usize);
            for k in 0..plan.recalls_per_person {
                if k > 0 && rng.random::<f64>() >= plan.later_recall_prob {
                    break;
                }
                let weekend = covariates.weekend(&mut rng);
                let second = k > 0;
                let x = params.design.row(&person_covs, weekend, second);
                let eps = &factor_e * standard_normal_vector(&mut rng, p);
                let w = DVector::from_fn(p, |j, _| params.linear_predictor(j, &x) + u[j] + eps[j]);
                let mut values = vec![0.0; p];
                for j in 0..p {
                    values[j] = match layout.kind(j) {
                        VariableKind::Indicator(_) => f64::from(u8::from(w[j] > 0.0)),
                        VariableKind::Amount(l) => {
                            if w[layout.indicator(l)] > 0.0 {
                                back_transform(params, j, w[j])
                            } else {
                                0.0
                            }
                        }
                        VariableKind::Daily(_) | VariableKind::Energy => back_transform(params, j, w[j]),
                    };
                }
                recalls.push(Recall {
                    index: k + 1,
                    weekend,
                    second,
                    values,
                });
            }
            Person {
                id: unit.person_id.clone(),
                covariates: person_covs,
                weight: unit.weight,
                stratum: unit.stratum,
                psu: unit.psu,
                recalls,
            }
        })
        .collect();

    Ok(RecallDataset {
        layout: layout.clone(),
        design: params.design.clone(),
        persons,
    })
}

fn back_transform(params: &ModelParams, j: usize, w: f64) -> f64 {
    let spec = params.transform_for(j).expect("transformed variable");
    g_tr_inverse_clamped(w, spec).max(AMOUNT_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_sizes_and_equal_weights() {
        let d = make_design(16, 10, WeightScheme::Equal, 1).unwrap();
        assert_eq!(d.units().len(), 320);
        assert_eq!(d.n_strata(), 16);
        assert!(d.units().iter().all(|u| u.weight == BASE_WEIGHT));
    }

    #[test]
    fn design_rejects_empty() {
        assert!(make_design(0, 10, WeightScheme::Equal, 1).is_err());
        assert!(make_design(3, 0, WeightScheme::Equal, 1).is_err());
        assert!(make_design(3, 2, WeightScheme::Lognormal { cv: 0.0 }, 1).is_err());
    }

    #[test]
    fn lognormal_weights_have_requested_spread() {
        let d = make_design(200, 25, WeightScheme::Lognormal { cv: 0.5 }, 3).unwrap();
        let w = d.weights();
        let m = crate::stats::mean(&w);
        let cv = crate::stats::sample_sd(&w) / m;
        assert!((m / BASE_WEIGHT - 1.0).abs() < 0.03, "mean {m}");
        assert!((cv - 0.5).abs() < 0.03, "cv {cv}");
    }

    #[test]
    fn person_seeds_depend_on_id_and_master() {
        assert_ne!(person_seed(1, "P000001"), person_seed(1, "P000002"));
        assert_ne!(person_seed(1, "P000001"), person_seed(2, "P000001"));
    }
}
