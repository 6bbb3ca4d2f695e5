//! Default numeric settings shared by the library and the command line.

use crate::scoring::{HeiComponent, N_COMPONENTS};

/// Population Monte Carlo draws.
pub const MC_DRAWS: usize = 10_000;
/// Below this many Monte Carlo draws a report carries a precision warning.
pub const MC_DRAWS_WARNING: usize = 1_000;
/// Share of weekend days (Friday to Sunday) in a week.
pub const WEEKEND_SHARE: f64 = 3.0 / 7.0;
/// Total-score cut-off for the low-score probability.
pub const LOW_SCORE_THRESHOLD: f64 = 40.0;
/// Percentiles printed in reports.
pub const REPORT_PERCENTILES: [f64; 7] = [5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0];
/// Fay coefficient for balanced repeated replication; zero is plain BRR.
pub const FAY_FACTOR: f64 = 0.0;
/// Fewer strata than this gives an unstable replication variance.
pub const BRR_MIN_STRATA: usize = 8;

/// Densities (per 1000 kcal, or percent of energy for saturated fat and
/// SoFAAS) assumed for components a model layout does not include, so that
/// a total score can still be formed.
pub const FALLBACK_DENSITIES: [f64; N_COMPONENTS] = [
    0.6,    // total fruit, cups
    0.3,    // whole fruit, cups
    0.6,    // total vegetables, cups
    0.1,    // dark green/orange vegetables and legumes, cups
    3.0,    // total grains, oz
    0.3,    // whole grains, oz
    1.0,    // milk, cups
    1.8,    // meat and beans, oz
    6.0,    // oils, g
    12.0,   // saturated fat, % of energy
    1500.0, // sodium, mg
    35.0,   // SoFAAS, % of energy
];

pub fn fallback_density(c: HeiComponent) -> f64 {
    FALLBACK_DENSITIES[c.index()]
}
