use serde::{Deserialize, Serialize};

/// Covariate vector of one recall: intercept, the person-level covariates,
/// a weekend-day dummy and a second-recall dummy. Every dietary variable
/// shares this design row.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateDesign {
    pub person: Vec<String>,
}

impl CovariateDesign {
    pub fn new(person: Vec<String>) -> Self {
        Self { person }
    }

    pub fn q(&self) -> usize {
        self.person.len() + 3
    }

    pub fn weekend_column(&self) -> usize {
        self.person.len() + 1
    }

    pub fn sequence_column(&self) -> usize {
        self.person.len() + 2
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.q());
        names.push("intercept".to_string());
        names.extend(self.person.iter().cloned());
        names.push("weekend".to_string());
        names.push("sequence".to_string());
        names
    }

    pub fn row(&self, person_covariates: &[f64], weekend: bool, second_recall: bool) -> Vec<f64> {
        let mut row = vec![0.0; self.q()];
        self.fill_row(&mut row, person_covariates, weekend, second_recall);
        row
    }

    pub fn fill_row(&self, out: &mut [f64], person_covariates: &[f64], weekend: bool, second_recall: bool) {
        debug_assert_eq!(person_covariates.len(), self.person.len());
        out[0] = 1.0;
        out[1..=self.person.len()].copy_from_slice(person_covariates);
        out[self.weekend_column()] = f64::from(u8::from(weekend));
        out[self.sequence_column()] = f64::from(u8::from(second_recall));
    }
}
