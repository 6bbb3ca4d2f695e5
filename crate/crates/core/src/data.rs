//! Recall-level survey data and the stratified two-PSU survey design.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CovariateDesign, VariableKind, VariableLayout};

/// One 24-hour recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recall {
    /// 1-based recall number within the person.
    pub index: u32,
    pub weekend: bool,
    /// Recall was not the person's first.
    pub second: bool,
    /// Observed dietary variables in layout order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Person {
    pub id: String,
    pub covariates: Vec<f64>,
    pub weight: f64,
    pub stratum: u32,
    pub psu: u32,
    pub recalls: Vec<Recall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallDataset {
    pub layout: VariableLayout,
    pub design: CovariateDesign,
    pub persons: Vec<Person>,
}

impl RecallDataset {
    pub fn n_persons(&self) -> usize {
        self.persons.len()
    }

    pub fn n_recalls(&self) -> usize {
        self.persons.iter().map(|p| p.recalls.len()).sum()
    }

    /// Check every schema rule; all violations are reported together.
    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::validation(problems.join("; ")))
        }
    }

    /// Human-readable list of rule violations.
    pub fn problems(&self) -> Vec<String> {
        let nc = self.design.person.len();
        let mut out = Vec::new();
        if self.persons.is_empty() {
            out.push("dataset has no persons".to_string());
        }
        let mut seen = std::collections::HashSet::new();
        for person in &self.persons {
            let who = format!("person {}", person.id);
            if !seen.insert(person.id.as_str()) {
                out.push(format!("{who}: duplicate id"));
            }
            if !(person.weight >= 0.0 && person.weight.is_finite()) {
                out.push(format!("{who}: weight must be finite and >= 0"));
            }
            if person.covariates.len() != nc {
                out.push(format!(
                    "{who}: expected {nc} covariates, got {}",
                    person.covariates.len()
                ));
            }
            if person.covariates.iter().any(|c| !c.is_finite()) {
                out.push(format!("{who}: non-finite covariate"));
            }
            if person.recalls.is_empty() {
                out.push(format!("{who}: no recalls"));
            }
            for r in &person.recalls {
                if r.index == 0 {
                    out.push(format!("{who}: recall index must be >= 1"));
                }
                out.extend(
                    value_problems(&self.layout, &r.values)
                        .into_iter()
                        .map(|m| format!("{who} recall {}: {m}", r.index)),
                );
            }
        }
        if self.persons.iter().map(|p| p.weight).sum::<f64>() <= 0.0 && !self.persons.is_empty() {
            out.push("survey weights sum to zero".to_string());
        }
        out
    }

    /// Weights rescaled to mean one: `w_i * n / sum(w)`.
    pub fn normalized_weights(&self) -> Vec<f64> {
        normalize_weights(&self.persons.iter().map(|p| p.weight).collect::<Vec<_>>())
    }

    /// Copy of the dataset with different survey weights.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.persons.len() {
            return Err(Error::validation("weight vector length does not match persons"));
        }
        let mut out = self.clone();
        for (p, &w) in out.persons.iter_mut().zip(weights) {
            p.weight = w;
        }
        Ok(out)
    }

    /// Covariate row of a recall.
    pub fn design_row(&self, person: &Person, recall: &Recall) -> Vec<f64> {
        self.design.row(&person.covariates, recall.weekend, recall.second)
    }

    /// Positive observed values of transformed variable `t` across all recalls.
    pub fn positive_values(&self, t: usize) -> Vec<f64> {
        let j = self.layout.transformed_variable(t);
        self.persons
            .iter()
            .flat_map(|p| p.recalls.iter())
            .map(|r| r.values[j])
            .filter(|&v| v > 0.0)
            .collect()
    }

    pub fn survey_design(&self) -> Result<SurveyDesign> {
        SurveyDesign::new(
            self.persons
                .iter()
                .map(|p| DesignUnit {
                    person_id: p.id.clone(),
                    stratum: p.stratum,
                    psu: p.psu,
                    weight: p.weight,
                })
                .collect(),
        )
    }
}

/// Rule violations among one recall's dietary values: finiteness, 0/1
/// indicators, zero coupling of indicator and amount, positive daily values
/// and energy.
pub fn value_problems(layout: &VariableLayout, values: &[f64]) -> Vec<String> {
    let mut out = Vec::new();
    let p = layout.p();
    if values.len() != p {
        out.push(format!("expected {p} dietary values, got {}", values.len()));
        return out;
    }
    let names = layout.column_names();
    for (j, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            out.push(format!("{} is not finite", names[j]));
            continue;
        }
        match layout.kind(j) {
            VariableKind::Indicator(l) => {
                if v != 0.0 && v != 1.0 {
                    out.push(format!("{} must be 0 or 1, got {v}", names[j]));
                }
                let amt = values[layout.amount(l)];
                if v == 1.0 && !(amt > 0.0) {
                    out.push(format!("{} is 1 but {} is {amt}", names[j], names[layout.amount(l)]));
                }
                if v == 0.0 && amt != 0.0 {
                    out.push(format!("{} is 0 but {} is {amt}", names[j], names[layout.amount(l)]));
                }
            }
            VariableKind::Amount(_) => {
                if v < 0.0 {
                    out.push(format!("{} is negative", names[j]));
                }
            }
            VariableKind::Daily(_) | VariableKind::Energy => {
                if !(v > 0.0) {
                    out.push(format!("{} must be > 0, got {v}", names[j]));
                }
            }
        }
    }
    out
}

/// Weights rescaled to mean one. Equal weights map to exactly one.
pub fn normalize_weights(weights: &[f64]) -> Vec<f64> {
    if weights.windows(2).all(|w| w[0] == w[1]) {
        return vec![1.0; weights.len()];
    }
    let total: f64 = weights.iter().sum();
    let n = weights.len() as f64;
    weights.iter().map(|w| w * n / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignUnit {
    pub person_id: String,
    pub stratum: u32,
    pub psu: u32,
    pub weight: f64,
}

/// Stratified design with exactly two PSUs per stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDesign {
    units: Vec<DesignUnit>,
    strata: Vec<u32>,
    /// For each stratum (in `strata` order) its two PSU labels, ascending.
    psus: Vec<[u32; 2]>,
}

impl SurveyDesign {
    pub fn new(units: Vec<DesignUnit>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::validation("survey design has no persons"));
        }
        let mut by_stratum: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for u in &units {
            if !(u.weight >= 0.0 && u.weight.is_finite()) {
                return Err(Error::validation(format!(
                    "person {}: weight must be finite and >= 0",
                    u.person_id
                )));
            }
            let psus = by_stratum.entry(u.stratum).or_default();
            if !psus.contains(&u.psu) {
                psus.push(u.psu);
            }
        }
        let mut strata = Vec::with_capacity(by_stratum.len());
        let mut psus = Vec::with_capacity(by_stratum.len());
        for (s, mut ps) in by_stratum {
            if ps.len() != 2 {
                return Err(Error::validation(format!(
                    "stratum {s} has {} PSUs; balanced repeated replication needs exactly 2",
                    ps.len()
                )));
            }
            ps.sort_unstable();
            strata.push(s);
            psus.push([ps[0], ps[1]]);
        }
        Ok(Self { units, strata, psus })
    }

    pub fn units(&self) -> &[DesignUnit] {
        &self.units
    }

    pub fn n_strata(&self) -> usize {
        self.strata.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.weight).collect()
    }

    /// `(stratum position, 0 or 1 for first/second PSU)` of unit `i`.
    pub fn position(&self, i: usize) -> (usize, usize) {
        let u = &self.units[i];
        let h = self
            .strata
            .binary_search(&u.stratum)
            .expect("stratum indexed at construction");
        let which = usize::from(self.psus[h][1] == u.psu);
        (h, which)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::HeiComponent::*;

    fn dataset() -> RecallDataset {
        let layout = VariableLayout::new(vec![Milk], vec![Oil]).unwrap();
        RecallDataset {
            layout,
            design: CovariateDesign::default(),
            persons: vec![Person {
                id: "a".into(),
                covariates: vec![],
                weight: 2.0,
                stratum: 1,
                psu: 1,
                recalls: vec![Recall {
                    index: 1,
                    weekend: false,
                    second: false,
                    values: vec![1.0, 1.5, 12.0, 1500.0],
                }],
            }],
        }
    }

    #[test]
    fn valid_dataset_passes() {
        dataset().validate().unwrap();
    }

    #[test]
    fn zero_coupling_violations() {
        let mut d = dataset();
        d.persons[0].recalls[0].values[0] = 0.0;
        assert!(d.validate().unwrap_err().to_string().contains("milk_consumed is 0"));
        let mut d = dataset();
        d.persons[0].recalls[0].values[1] = 0.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn missing_energy_rejected() {
        let mut d = dataset();
        d.persons[0].recalls[0].values[3] = 0.0;
        assert!(d.validate().unwrap_err().to_string().contains("energy"));
    }

    #[test]
    fn design_requires_two_psus() {
        let unit = |id: &str, s, p| DesignUnit {
            person_id: id.into(),
            stratum: s,
            psu: p,
            weight: 1.0,
        };
        assert!(SurveyDesign::new(vec![unit("a", 1, 1), unit("b", 1, 2)]).is_ok());
        assert!(SurveyDesign::new(vec![unit("a", 1, 1), unit("b", 1, 1)]).is_err());
        assert!(SurveyDesign::new(vec![unit("a", 1, 1), unit("b", 1, 2), unit("c", 1, 3)]).is_err());
        let d = SurveyDesign::new(vec![unit("a", 4, 9), unit("b", 4, 7)]).unwrap();
        assert_eq!(d.position(0), (0, 1));
        assert_eq!(d.position(1), (0, 0));
    }

    #[test]
    fn weights_normalize_to_mean_one() {
        let w = normalize_weights(&[1.0, 3.0]);
        assert_eq!(w, vec![0.5, 1.5]);
        assert_eq!(normalize_weights(&[0.1; 7]), vec![1.0; 7]);
    }
}
