use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::HeiComponent;

/// Role of one coordinate of the latent vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableKind {
    /// Consumption indicator of episodic food `l`.
    Indicator(usize),
    /// Amount of episodic food `l`.
    Amount(usize),
    /// Daily-consumed component `l`.
    Daily(usize),
    Energy,
}

/// Ordering of the dietary variables of one recall:
/// `(ind_1, amt_1, ..., ind_E, amt_E, daily_1, ..., daily_D, energy)`.
///
/// Each episodic or daily variable is tied to the HEI component it measures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LayoutDoc", into = "LayoutDoc")]
pub struct VariableLayout {
    episodic: Vec<HeiComponent>,
    daily: Vec<HeiComponent>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutDoc {
    episodic: Vec<HeiComponent>,
    daily: Vec<HeiComponent>,
}

impl TryFrom<LayoutDoc> for VariableLayout {
    type Error = Error;

    fn try_from(doc: LayoutDoc) -> Result<Self> {
        VariableLayout::new(doc.episodic, doc.daily)
    }
}

impl From<VariableLayout> for LayoutDoc {
    fn from(l: VariableLayout) -> Self {
        LayoutDoc {
            episodic: l.episodic,
            daily: l.daily,
        }
    }
}

impl VariableLayout {
    pub fn new(episodic: Vec<HeiComponent>, daily: Vec<HeiComponent>) -> Result<Self> {
        let layout = Self { episodic, daily };
        if layout.p() < 3 {
            return Err(Error::validation(format!(
                "layout needs at least 3 variables, got {}",
                layout.p()
            )));
        }
        let mut seen = layout.components().collect::<Vec<_>>();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("layout lists an HEI component twice"));
        }
        Ok(layout)
    }

    /// All twelve HEI components: six episodic food groups, six daily components.
    pub fn full() -> Self {
        use HeiComponent::*;
        Self {
            episodic: vec![TotalFruit, WholeFruit, TotalVegetables, Dol, WholeGrains, Milk],
            daily: vec![TotalGrains, MeatBeans, Oil, SaturatedFat, Sodium, Sofaas],
        }
    }

    pub fn n_episodic(&self) -> usize {
        self.episodic.len()
    }

    pub fn n_daily(&self) -> usize {
        self.daily.len()
    }

    /// Number of dietary variables per recall.
    pub fn p(&self) -> usize {
        2 * self.episodic.len() + self.daily.len() + 1
    }

    /// Number of Box-Cox transformed variables (amounts, daily, energy).
    pub fn n_transformed(&self) -> usize {
        self.episodic.len() + self.daily.len() + 1
    }

    pub fn episodic(&self) -> &[HeiComponent] {
        &self.episodic
    }

    pub fn daily(&self) -> &[HeiComponent] {
        &self.daily
    }

    pub fn indicator(&self, l: usize) -> usize {
        2 * l
    }

    pub fn amount(&self, l: usize) -> usize {
        2 * l + 1
    }

    pub fn daily_index(&self, l: usize) -> usize {
        2 * self.episodic.len() + l
    }

    pub fn energy(&self) -> usize {
        self.p() - 1
    }

    pub fn kind(&self, j: usize) -> VariableKind {
        let e2 = 2 * self.episodic.len();
        if j < e2 {
            if j.is_multiple_of(2) {
                VariableKind::Indicator(j / 2)
            } else {
                VariableKind::Amount(j / 2)
            }
        } else if j < e2 + self.daily.len() {
            VariableKind::Daily(j - e2)
        } else {
            assert!(j < self.p(), "variable index {j} out of range");
            VariableKind::Energy
        }
    }

    pub fn is_indicator(&self, j: usize) -> bool {
        matches!(self.kind(j), VariableKind::Indicator(_))
    }

    /// Index into the transform list for variable `j`, if it is transformed.
    pub fn transform_index(&self, j: usize) -> Option<usize> {
        match self.kind(j) {
            VariableKind::Indicator(_) => None,
            VariableKind::Amount(l) => Some(l),
            VariableKind::Daily(l) => Some(self.episodic.len() + l),
            VariableKind::Energy => Some(self.episodic.len() + self.daily.len()),
        }
    }

    /// Variable index of the `t`-th transformed variable.
    pub fn transformed_variable(&self, t: usize) -> usize {
        let e = self.episodic.len();
        if t < e {
            self.amount(t)
        } else if t < e + self.daily.len() {
            self.daily_index(t - e)
        } else {
            self.energy()
        }
    }

    /// HEI component measured by variable `j` (none for energy).
    pub fn component(&self, j: usize) -> Option<HeiComponent> {
        match self.kind(j) {
            VariableKind::Indicator(l) | VariableKind::Amount(l) => Some(self.episodic[l]),
            VariableKind::Daily(l) => Some(self.daily[l]),
            VariableKind::Energy => None,
        }
    }

    pub fn components(&self) -> impl Iterator<Item = HeiComponent> + '_ {
        self.episodic.iter().chain(&self.daily).copied()
    }

    /// Column names of the dietary variables, in variable order.
    pub fn column_names(&self) -> Vec<String> {
        (0..self.p())
            .map(|j| match self.kind(j) {
                VariableKind::Indicator(l) => format!("{}_consumed", self.episodic[l].key()),
                VariableKind::Amount(l) => format!("{}_amount", self.episodic[l].key()),
                VariableKind::Daily(l) => self.daily[l].key().to_string(),
                VariableKind::Energy => "energy".to_string(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_layout_has_19_variables() {
        let l = VariableLayout::full();
        assert_eq!(l.p(), 19);
        assert_eq!(l.n_transformed(), 13);
        assert_eq!(l.indicator(0), 0);
        assert_eq!(l.amount(5), 11);
        assert_eq!(l.daily_index(0), 12);
        assert_eq!(l.energy(), 18);
        assert_eq!(l.kind(11), VariableKind::Amount(5));
        assert_eq!(l.kind(12), VariableKind::Daily(0));
        assert_eq!(l.kind(18), VariableKind::Energy);
    }

    #[test]
    fn transform_indices_are_consistent() {
        let l = VariableLayout::full();
        for t in 0..l.n_transformed() {
            assert_eq!(l.transform_index(l.transformed_variable(t)), Some(t));
        }
        assert_eq!(l.transform_index(0), None);
    }

    #[test]
    fn rejects_tiny_and_duplicate_layouts() {
        use HeiComponent::*;
        assert!(VariableLayout::new(vec![], vec![Oil]).is_err());
        assert!(VariableLayout::new(vec![Milk], vec![Milk]).is_err());
        assert!(VariableLayout::new(vec![Milk], vec![]).is_ok());
    }

    #[test]
    fn column_names() {
        use HeiComponent::*;
        let l = VariableLayout::new(vec![TotalFruit, Milk], vec![]).unwrap();
        assert_eq!(
            l.column_names(),
            [
                "total_fruit_consumed",
                "total_fruit_amount",
                "milk_consumed",
                "milk_amount",
                "energy"
            ]
        );
    }

    #[test]
    fn serde_validates() {
        let bad = r#"{"episodic": [], "daily": ["oil"]}"#;
        assert!(serde_json::from_str::<VariableLayout>(bad).is_err());
        let good = r#"{"episodic": ["milk"], "daily": ["oil"]}"#;
        assert_eq!(serde_json::from_str::<VariableLayout>(good).unwrap().p(), 4);
    }
}
