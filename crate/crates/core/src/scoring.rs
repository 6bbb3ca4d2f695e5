//! HEI-2005 densities, component scores and the total score.
//!
//! Nine adequacy components are scored proportionally to their density up to
//! a standard; saturated fat, sodium and SoFAAS are moderation components
//! whose scores fall piecewise-linearly as density rises.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_COMPONENTS: usize = 12;

/// The twelve HEI-2005 components in scoring-table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeiComponent {
    TotalFruit,
    WholeFruit,
    TotalVegetables,
    Dol,
    TotalGrains,
    WholeGrains,
    Milk,
    MeatBeans,
    Oil,
    SaturatedFat,
    Sodium,
    Sofaas,
}

impl HeiComponent {
    pub const ALL: [HeiComponent; N_COMPONENTS] = [
        HeiComponent::TotalFruit,
        HeiComponent::WholeFruit,
        HeiComponent::TotalVegetables,
        HeiComponent::Dol,
        HeiComponent::TotalGrains,
        HeiComponent::WholeGrains,
        HeiComponent::Milk,
        HeiComponent::MeatBeans,
        HeiComponent::Oil,
        HeiComponent::SaturatedFat,
        HeiComponent::Sodium,
        HeiComponent::Sofaas,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column / file key.
    pub fn key(self) -> &'static str {
        match self {
            HeiComponent::TotalFruit => "total_fruit",
            HeiComponent::WholeFruit => "whole_fruit",
            HeiComponent::TotalVegetables => "total_vegetables",
            HeiComponent::Dol => "dol",
            HeiComponent::TotalGrains => "total_grains",
            HeiComponent::WholeGrains => "whole_grains",
            HeiComponent::Milk => "milk",
            HeiComponent::MeatBeans => "meat_beans",
            HeiComponent::Oil => "oil",
            HeiComponent::SaturatedFat => "saturated_fat",
            HeiComponent::Sodium => "sodium",
            HeiComponent::Sofaas => "sofaas",
        }
    }

    /// Row label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            HeiComponent::TotalFruit => "Total fruit",
            HeiComponent::WholeFruit => "Whole fruit",
            HeiComponent::TotalVegetables => "Total vegetables",
            HeiComponent::Dol => "DOL",
            HeiComponent::TotalGrains => "Total grains",
            HeiComponent::WholeGrains => "Whole grains",
            HeiComponent::Milk => "Milk",
            HeiComponent::MeatBeans => "Meat and beans",
            HeiComponent::Oil => "Oil",
            HeiComponent::SaturatedFat => "Saturated fat",
            HeiComponent::Sodium => "Sodium",
            HeiComponent::Sofaas => "SoFAAS",
        }
    }

    pub fn max_score(self) -> f64 {
        match self {
            HeiComponent::TotalFruit
            | HeiComponent::WholeFruit
            | HeiComponent::TotalVegetables
            | HeiComponent::Dol
            | HeiComponent::TotalGrains
            | HeiComponent::WholeGrains => 5.0,
            HeiComponent::Milk
            | HeiComponent::MeatBeans
            | HeiComponent::Oil
            | HeiComponent::SaturatedFat
            | HeiComponent::Sodium => 10.0,
            HeiComponent::Sofaas => 20.0,
        }
    }

    /// Density at which an adequacy component reaches its maximum score.
    /// `None` for the three moderation components.
    pub fn adequacy_standard(self) -> Option<f64> {
        match self {
            HeiComponent::TotalFruit => Some(0.8),
            HeiComponent::WholeFruit => Some(0.4),
            HeiComponent::TotalVegetables => Some(1.1),
            HeiComponent::Dol => Some(0.4),
            HeiComponent::TotalGrains => Some(3.0),
            HeiComponent::WholeGrains => Some(1.5),
            HeiComponent::Milk => Some(1.3),
            HeiComponent::MeatBeans => Some(2.5),
            HeiComponent::Oil => Some(12.0),
            HeiComponent::SaturatedFat | HeiComponent::Sodium | HeiComponent::Sofaas => None,
        }
    }

    pub fn is_moderation(self) -> bool {
        self.adequacy_standard().is_none()
    }

    /// Multiplier turning `amount / energy` into the component's density.
    pub fn density_factor(self) -> f64 {
        match self {
            HeiComponent::SaturatedFat => 900.0,
            HeiComponent::Sofaas => 100.0,
            _ => 1000.0,
        }
    }
}

impl fmt::Display for HeiComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for HeiComponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeiComponent::ALL
            .iter()
            .copied()
            .find(|c| c.key() == s)
            .ok_or_else(|| Error::domain(format!("unknown HEI component `{s}`")))
    }
}

/// Daily amounts of the twelve components (scoring-table units) plus energy in kcal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntakeVector {
    pub amounts: [f64; N_COMPONENTS],
    pub energy: f64,
}

impl IntakeVector {
    pub fn new(amounts: [f64; N_COMPONENTS], energy: f64) -> Result<Self> {
        let intake = Self { amounts, energy };
        intake.validate()?;
        Ok(intake)
    }

    pub fn validate(&self) -> Result<()> {
        for (c, &a) in HeiComponent::ALL.iter().zip(&self.amounts) {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::domain(format!("{c} amount must be finite and >= 0, got {a}")));
            }
        }
        if !(self.energy >= 0.0 && self.energy.is_finite()) {
            return Err(Error::domain(format!(
                "energy must be finite and >= 0, got {}",
                self.energy
            )));
        }
        Ok(())
    }

    pub fn amount(&self, c: HeiComponent) -> f64 {
        self.amounts[c.index()]
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut amounts = self.amounts;
        amounts.iter_mut().for_each(|a| *a *= c);
        Self {
            amounts,
            energy: self.energy * c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityVector(pub [f64; N_COMPONENTS]);

impl DensityVector {
    pub fn get(&self, c: HeiComponent) -> f64 {
        self.0[c.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreProfile {
    pub components: [f64; N_COMPONENTS],
    pub total: f64,
}

impl ScoreProfile {
    pub fn get(&self, c: HeiComponent) -> f64 {
        self.components[c.index()]
    }

    /// The 12 component scores followed by the total.
    pub fn to_row(&self) -> [f64; N_COMPONENTS + 1] {
        let mut row = [0.0; N_COMPONENTS + 1];
        row[..N_COMPONENTS].copy_from_slice(&self.components);
        row[N_COMPONENTS] = self.total;
        row
    }
}

pub fn compute_densities(intake: &IntakeVector) -> Result<DensityVector> {
    intake.validate()?;
    if intake.energy <= 0.0 {
        return Err(Error::domain(format!(
            "densities need positive energy, got {}",
            intake.energy
        )));
    }
    let mut out = [0.0; N_COMPONENTS];
    for c in HeiComponent::ALL {
        out[c.index()] = c.density_factor() * intake.amount(c) / intake.energy;
    }
    Ok(DensityVector(out))
}

/// Amount that produces `density` at the given energy; inverse of the density rule.
pub fn amount_for_density(c: HeiComponent, density: f64, energy: f64) -> f64 {
    density * energy / c.density_factor()
}

pub fn score_component(c: HeiComponent, density: f64) -> Result<f64> {
    if !(density >= 0.0) || density.is_infinite() {
        return Err(Error::domain(format!(
            "{c} density must be finite and >= 0, got {density}"
        )));
    }
    if let Some(standard) = c.adequacy_standard() {
        let cap = c.max_score();
        return Ok(cap.min(cap * (density / standard)));
    }
    let score = match c {
        HeiComponent::SaturatedFat => {
            if density >= 15.0 {
                0.0
            } else if density <= 7.0 {
                10.0
            } else if density > 10.0 {
                8.0 - (8.0 * (density - 10.0) / 5.0)
            } else {
                10.0 - (2.0 * (density - 7.0) / 3.0)
            }
        }
        HeiComponent::Sodium => {
            if density >= 2000.0 {
                0.0
            } else if density <= 700.0 {
                10.0
            } else if density >= 1100.0 {
                8.0 - (8.0 * (density - 1100.0) / (2000.0 - 1100.0))
            } else {
                10.0 - (2.0 * (density - 700.0) / (1100.0 - 700.0))
            }
        }
        HeiComponent::Sofaas => {
            if density >= 50.0 {
                0.0
            } else if density <= 20.0 {
                20.0
            } else {
                20.0 - (20.0 * (density - 20.0) / (50.0 - 20.0))
            }
        }
        _ => unreachable!("adequacy components handled above"),
    };
    Ok(score)
}

/// Score a component given by its key, e.g. `"sodium"`.
pub fn score_component_by_key(key: &str, density: f64) -> Result<f64> {
    score_component(key.parse()?, density)
}

pub fn score_densities(densities: &DensityVector) -> Result<ScoreProfile> {
    let mut components = [0.0; N_COMPONENTS];
    for c in HeiComponent::ALL {
        components[c.index()] = score_component(c, densities.get(c))?;
    }
    let total = components.iter().sum();
    Ok(ScoreProfile { components, total })
}

pub fn score_profile(intake: &IntakeVector) -> Result<ScoreProfile> {
    score_densities(&compute_densities(intake)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intake_with(c: HeiComponent, amount: f64, energy: f64) -> IntakeVector {
        let mut amounts = [0.0; N_COMPONENTS];
        amounts[c.index()] = amount;
        IntakeVector::new(amounts, energy).unwrap()
    }

    #[test]
    fn density_examples() {
        let d = compute_densities(&intake_with(HeiComponent::TotalFruit, 0.8, 1000.0)).unwrap();
        assert!((d.get(HeiComponent::TotalFruit) - 0.8).abs() < 1e-15);

        let d = compute_densities(&intake_with(HeiComponent::SaturatedFat, 10.0, 600.0)).unwrap();
        assert!((d.get(HeiComponent::SaturatedFat) - 15.0).abs() < 1e-12);

        let d = compute_densities(&IntakeVector::new([0.0; 12], 1500.0).unwrap()).unwrap();
        assert!(d.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sofaas_and_sodium_density_units() {
        let d = compute_densities(&intake_with(HeiComponent::Sofaas, 300.0, 1000.0)).unwrap();
        assert!((d.get(HeiComponent::Sofaas) - 30.0).abs() < 1e-12);
        let d = compute_densities(&intake_with(HeiComponent::Sodium, 2000.0, 1600.0)).unwrap();
        assert!((d.get(HeiComponent::Sodium) - 1250.0).abs() < 1e-12);
    }

    #[test]
    fn zero_energy_is_domain_error() {
        let intake = IntakeVector {
            amounts: [1.0; 12],
            energy: 0.0,
        };
        assert!(matches!(compute_densities(&intake), Err(Error::Domain(_))));
        let neg = IntakeVector {
            amounts: [1.0; 12],
            energy: -5.0,
        };
        assert!(compute_densities(&neg).is_err());
    }

    #[test]
    fn component_examples() {
        let s = |c, d| score_component(c, d).unwrap();
        assert_eq!(s(HeiComponent::TotalFruit, 0.8), 5.0);
        assert_eq!(s(HeiComponent::SaturatedFat, 15.0), 0.0);
        assert_eq!(s(HeiComponent::SaturatedFat, 7.0), 10.0);
        assert!((s(HeiComponent::Sodium, 1550.0) - 4.0).abs() < 1e-12);
        assert!((s(HeiComponent::Sofaas, 35.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_fat_middle_knot_branches_agree() {
        // upper branch: 8 - 8*(10-10)/5; lower branch: 10 - 2*(10-7)/3
        let upper: f64 = 8.0 - (8.0 * (10.0 - 10.0) / 5.0);
        let lower = 10.0 - (2.0 * (10.0_f64 - 7.0) / 3.0);
        assert!((upper - 8.0).abs() < 1e-12);
        assert!((lower - 8.0).abs() < 1e-12);
        assert!((score_component(HeiComponent::SaturatedFat, 10.0).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_component_key_rejected() {
        assert!(matches!(score_component_by_key("kale", 1.0), Err(Error::Domain(_))));
        assert_eq!(score_component_by_key("oil", 12.0).unwrap(), 10.0);
    }

    #[test]
    fn negative_density_rejected() {
        assert!(score_component(HeiComponent::Milk, -0.1).is_err());
        assert!(score_component(HeiComponent::Milk, f64::NAN).is_err());
    }

    #[test]
    fn ideal_intake_scores_100() {
        let energy = 1000.0;
        let mut amounts = [0.0; 12];
        for c in HeiComponent::ALL {
            if let Some(std) = c.adequacy_standard() {
                amounts[c.index()] = amount_for_density(c, std * 1.5, energy);
            }
        }
        amounts[HeiComponent::SaturatedFat.index()] = amount_for_density(HeiComponent::SaturatedFat, 7.0, energy);
        amounts[HeiComponent::Sodium.index()] = amount_for_density(HeiComponent::Sodium, 700.0, energy);
        amounts[HeiComponent::Sofaas.index()] = amount_for_density(HeiComponent::Sofaas, 20.0, energy);
        let p = score_profile(&IntakeVector::new(amounts, energy).unwrap()).unwrap();
        assert!((p.total - 100.0).abs() < 1e-12);
    }

    #[test]
    fn empty_diet_scores_40() {
        let p = score_profile(&IntakeVector::new([0.0; 12], 1800.0).unwrap()).unwrap();
        for c in HeiComponent::ALL {
            let expected = match c {
                HeiComponent::SaturatedFat | HeiComponent::Sodium => 10.0,
                HeiComponent::Sofaas => 20.0,
                _ => 0.0,
            };
            assert_eq!(p.get(c), expected, "{c}");
        }
        assert_eq!(p.total, 40.0);
    }

    #[test]
    fn caps_sum_to_100() {
        let s: f64 = HeiComponent::ALL.iter().map(|c| c.max_score()).sum();
        assert_eq!(s, 100.0);
    }

    #[test]
    fn key_round_trip() {
        for c in HeiComponent::ALL {
            assert_eq!(c.key().parse::<HeiComponent>().unwrap(), c);
        }
    }
}
