//! Usual-intake distributions by Monte Carlo over the fitted population,
//! and the single-recall ("naive") comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Person, RecallDataset};
use crate::defaults::{
    fallback_density, LOW_SCORE_THRESHOLD, MC_DRAWS, MC_DRAWS_WARNING, REPORT_PERCENTILES, WEEKEND_SHARE,
};
use crate::error::{Error, Result};
use crate::linalg::{psd_factor, standard_normal_vector};
use crate::model::{ModelParams, VariableKind};
use crate::scoring::{amount_for_density, score_profile, HeiComponent, IntakeVector, ScoreProfile, N_COMPONENTS};
use crate::stats::{mix_seed, norm_cdf};
use crate::transform::g_tr_star_clamped;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub n_draws: usize,
    pub seed: u64,
    pub weekend_share: f64,
    pub threshold: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            n_draws: MC_DRAWS,
            seed: 1,
            weekend_share: WEEKEND_SHARE,
            threshold: LOW_SCORE_THRESHOLD,
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::validation("population Monte Carlo needs at least one draw"));
        }
        if !(0.0..=1.0).contains(&self.weekend_share) {
            return Err(Error::validation("weekend_share must lie in [0, 1]"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::validation("threshold must be finite"));
        }
        Ok(())
    }
}

/// Long-run average daily intake of a person with covariates `person_covs`
/// and random effects `u`, averaging weekday and weekend days. Components
/// outside the layout get their fallback density at the person's usual energy.
pub fn usual_intake(params: &ModelParams, person_covs: &[f64], u: &[f64], weekend_share: f64) -> IntakeVector {
    let layout = &params.layout;
    let p = layout.p();
    let days = [(false, 1.0 - weekend_share), (true, weekend_share)];
    let mut expected = vec![0.0; p];
    for (weekend, share) in days {
        if share == 0.0 {
            continue;
        }
        let x = params.design.row(person_covs, weekend, false);
        for j in 0..p {
            let back = |j: usize| {
                let spec = params.transform_for(j).expect("transformed variable");
                g_tr_star_clamped(params.linear_predictor(j, &x) + u[j], spec, params.sigma_eps[(j, j)])
            };
            expected[j] += share
                * match layout.kind(j) {
                    VariableKind::Indicator(_) => continue,
                    VariableKind::Amount(l) => {
                        let ind = layout.indicator(l);
                        norm_cdf(params.linear_predictor(ind, &x) + u[ind]) * back(j)
                    }
                    VariableKind::Daily(_) | VariableKind::Energy => back(j),
                };
        }
    }
    let energy = expected[layout.energy()];
    let mut amounts = [f64::NAN; N_COMPONENTS];
    for j in 0..p {
        if let (Some(c), VariableKind::Amount(_) | VariableKind::Daily(_)) = (layout.component(j), layout.kind(j)) {
            amounts[c.index()] = expected[j];
        }
    }
    for c in HeiComponent::ALL {
        if amounts[c.index()].is_nan() {
            amounts[c.index()] = amount_for_density(c, fallback_density(c), energy);
        }
    }
    IntakeVector { amounts, energy }
}

/// Simulated population of usual-intake score profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSample {
    pub profiles: Vec<ScoreProfile>,
}

/// Cumulative weights for inverse-CDF person selection.
fn cumulative(weights: &[f64]) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    let cum: Vec<f64> = weights
        .iter()
        .map(|&w| {
            acc += w;
            acc
        })
        .collect();
    if !(acc > 0.0 && acc.is_finite()) {
        return Err(Error::validation(
            "population weights must have a positive finite total",
        ));
    }
    Ok(cum)
}

fn pick(cum: &[f64], u: f64) -> usize {
    let target = u * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= target).min(cum.len() - 1)
}

/// Draw `n_draws` persons with probability proportional to `weights`, a
/// random effect for each from `N(0, Sigma_u)`, and score their usual intake.
/// Parameter sets are chosen uniformly per draw from `params`.
///
/// Draw `r` uses its own random stream, so the result does not depend on
/// the thread count, and changing only the weights keeps the same uniforms
/// (common random numbers).
pub fn simulate_population(
    params: &[ModelParams],
    persons: &[Person],
    weights: &[f64],
    config: &PopulationConfig,
) -> Result<PopulationSample> {
    config.validate()?;
    if params.is_empty() {
        return Err(Error::validation("no parameter sets supplied"));
    }
    if persons.is_empty() || persons.len() != weights.len() {
        return Err(Error::validation(
            "persons and weights must be non-empty and of equal length",
        ));
    }
    let factors = params
        .iter()
        .map(|pr| {
            pr.validate()?;
            if persons.iter().any(|p| p.covariates.len() != pr.design.person.len()) {
                return Err(Error::validation(
                    "person covariates do not match the model's covariates",
                ));
            }
            psd_factor(&pr.sigma_u)
        })
        .collect::<Result<Vec<_>>>()?;
    let cum = cumulative(weights)?;
    let profiles = (0..config.n_draws)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, r as u64));
            let person = &persons[pick(&cum, rng.random::<f64>())];
            let which = if params.len() == 1 {
                0
            } else {
                rng.random_range(0..params.len())
            };
            let pr = &params[which];
            let u = &factors[which] * standard_normal_vector(&mut rng, pr.p());
            let intake = usual_intake(pr, &person.covariates, u.as_slice(), config.weekend_share);
            score_profile(&intake)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PopulationSample { profiles })
}

/// Score of each person's first recall, with the person's survey weight.
/// Persons whose first recall has no energy are skipped.
pub fn naive_profiles(data: &RecallDataset) -> Result<(Vec<ScoreProfile>, Vec<f64>)> {
    let layout = &data.layout;
    let mut profiles = Vec::with_capacity(data.n_persons());
    let mut weights = Vec::with_capacity(data.n_persons());
    for person in &data.persons {
        let Some(first) = person.recalls.iter().min_by_key(|r| r.index) else {
            continue;
        };
        let energy = first.values[layout.energy()];
        if !(energy > 0.0) {
            continue;
        }
        let mut amounts = [f64::NAN; N_COMPONENTS];
        for j in 0..layout.p() {
            if let (Some(c), VariableKind::Amount(_) | VariableKind::Daily(_)) = (layout.component(j), layout.kind(j)) {
                amounts[c.index()] = first.values[j];
            }
        }
        for c in HeiComponent::ALL {
            if amounts[c.index()].is_nan() {
                amounts[c.index()] = amount_for_density(c, fallback_density(c), energy);
            }
        }
        profiles.push(score_profile(&IntakeVector { amounts, energy })?);
        weights.push(person.weight);
    }
    if profiles.is_empty() {
        return Err(Error::validation("no person has a usable first recall"));
    }
    Ok((profiles, weights))
}

/// Smallest value whose cumulative weight reaches `pct / 100` of the total.
pub fn weighted_percentile(values: &[f64], weights: &[f64], pct: f64) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::validation(
            "percentile needs equal-length, non-empty values and weights",
        ));
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::domain(format!("percentile must lie in [0, 100], got {pct}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::validation("weights must have a positive total"));
    }
    let target = pct / 100.0 * total;
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if acc >= target * (1.0 - 1e-12) {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().expect("non-empty")])
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub mean: f64,
    /// Values at [`REPORT_PERCENTILES`].
    pub percentiles: Vec<f64>,
}

impl ReportRow {
    /// Mean followed by the percentiles.
    pub fn values(&self) -> Vec<f64> {
        std::iter::once(self.mean)
            .chain(self.percentiles.iter().copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    /// Twelve component rows followed by the total score.
    pub rows: Vec<ReportRow>,
    pub threshold: f64,
    /// Weighted share of total scores at or below `threshold`.
    pub prob_at_or_below: f64,
    pub n: usize,
    pub warnings: Vec<String>,
}

impl DistributionReport {
    /// All summary values in row order, then the low-score probability.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.rows.iter().flat_map(ReportRow::values).collect();
        out.push(self.prob_at_or_below);
        out
    }
}

pub const TOTAL_LABEL: &str = "Total score";

/// Weighted means and percentiles of each component and the total score.
pub fn summarize(profiles: &[ScoreProfile], weights: &[f64], threshold: f64) -> Result<DistributionReport> {
    if profiles.is_empty() || profiles.len() != weights.len() {
        return Err(Error::validation(
            "summary needs equal-length, non-empty profiles and weights",
        ));
    }
    let row = |label: &str, values: Vec<f64>| -> Result<ReportRow> {
        Ok(ReportRow {
            label: label.to_string(),
            mean: weighted_mean(&values, weights),
            percentiles: REPORT_PERCENTILES
                .iter()
                .map(|&p| weighted_percentile(&values, weights, p))
                .collect::<Result<_>>()?,
        })
    };
    let mut rows = Vec::with_capacity(N_COMPONENTS + 1);
    for c in HeiComponent::ALL {
        rows.push(row(c.label(), profiles.iter().map(|s| s.get(c)).collect())?);
    }
    let totals: Vec<f64> = profiles.iter().map(|s| s.total).collect();
    rows.push(row(TOTAL_LABEL, totals.clone())?);
    let total_w: f64 = weights.iter().sum();
    let below = totals
        .iter()
        .zip(weights)
        .filter(|(t, _)| **t <= threshold)
        .fold(0.0, |acc, (_, w)| acc + w);
    let mut warnings = Vec::new();
    if profiles.len() < MC_DRAWS_WARNING {
        warnings.push(format!(
            "only {} draws; tail percentiles are imprecise below {MC_DRAWS_WARNING}",
            profiles.len()
        ));
    }
    Ok(DistributionReport {
        rows,
        threshold,
        prob_at_or_below: below / total_w,
        n: profiles.len(),
        warnings,
    })
}

/// Usual-intake report: population Monte Carlo with equal-weight draws.
pub fn population_report(
    params: &[ModelParams],
    data: &RecallDataset,
    weights: &[f64],
    config: &PopulationConfig,
) -> Result<DistributionReport> {
    let sample = simulate_population(params, &data.persons, weights, config)?;
    let ones = vec![1.0; sample.profiles.len()];
    summarize(&sample.profiles, &ones, config.threshold)
}

/// Single-recall report with the given person weights.
pub fn naive_report(data: &RecallDataset, weights: &[f64], threshold: f64) -> Result<DistributionReport> {
    if weights.len() != data.n_persons() {
        return Err(Error::validation("weight vector length does not match persons"));
    }
    let with = data.with_weights(weights)?;
    let (profiles, w) = naive_profiles(&with)?;
    let mut report = summarize(&profiles, &w, threshold)?;
    report.warnings.clear();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_is_smallest_value_reaching_the_mass() {
        let v = [3.0, 1.0, 2.0, 4.0];
        let w = [1.0; 4];
        assert_eq!(weighted_percentile(&v, &w, 50.0).unwrap(), 2.0);
        assert_eq!(weighted_percentile(&v, &w, 51.0).unwrap(), 3.0);
        assert_eq!(weighted_percentile(&v, &w, 0.0).unwrap(), 1.0);
        assert_eq!(weighted_percentile(&v, &w, 100.0).unwrap(), 4.0);
        let w = [1.0, 1.0, 1.0, 5.0];
        assert_eq!(weighted_percentile(&v, &w, 50.0).unwrap(), 4.0);
    }

    #[test]
    fn percentile_rejects_bad_input() {
        assert!(weighted_percentile(&[], &[], 50.0).is_err());
        assert!(weighted_percentile(&[1.0], &[1.0], 101.0).is_err());
    }

    #[test]
    fn pick_follows_cumulative_weights() {
        let cum = cumulative(&[1.0, 0.0, 3.0]).unwrap();
        assert_eq!(pick(&cum, 0.0), 0);
        assert_eq!(pick(&cum, 0.2), 0);
        assert_eq!(pick(&cum, 0.25), 2);
        assert_eq!(pick(&cum, 0.999), 2);
        assert!(cumulative(&[0.0, 0.0]).is_err());
    }
}
