//! Known parameter sets used for simulation studies.
//!
//! The "paper-like" preset covers all twelve HEI components for children's
//! diets: nonconsumption rates of the six episodic food groups are
//! 17% (total fruit), 40% (whole fruit), 3% (total vegetables), 50% (DOL),
//! 42% (whole grains) and 12% (milk). Reduced presets keep a subset of its
//! variables, so their covariances are principal submatrices of the full ones.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{CovariateDesign, ModelParams, VariableKind, VariableLayout};
use crate::scoring::HeiComponent::{self, *};
use crate::stats::norm_cdf;
use crate::transform::{boxcox, TransformSpec};

/// Probability that a recall falls on a weekend day (Friday to Sunday).
pub const WEEKEND_PROB: f64 = 3.0 / 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// All 19 variables.
    PaperLike,
    /// Total fruit and whole fruit plus energy (p = 5).
    P5,
    /// Total fruit, whole fruit and milk, saturated fat and sodium, plus energy (p = 9).
    P9,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-like" => Ok(Preset::PaperLike),
            "p5" => Ok(Preset::P5),
            "p9" => Ok(Preset::P9),
            other => Err(Error::validation(format!(
                "unknown preset `{other}` (expected paper-like, p5 or p9)"
            ))),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperLike => "paper-like",
            Preset::P5 => "p5",
            Preset::P9 => "p9",
        }
    }

    pub fn layout(self) -> VariableLayout {
        match self {
            Preset::PaperLike => Ok(VariableLayout::full()),
            Preset::P5 => VariableLayout::new(vec![TotalFruit, WholeFruit], vec![]),
            Preset::P9 => VariableLayout::new(vec![TotalFruit, WholeFruit, Milk], vec![SaturatedFat, Sodium]),
        }
        .expect("preset layouts are valid")
    }

    pub fn params(self) -> ModelParams {
        let full = paper_like();
        if self == Preset::PaperLike {
            return full;
        }
        restrict(&full, &self.layout()).expect("preset layouts are sublayouts of the full layout")
    }
}

/// Per-component generating values.
struct ComponentSpec {
    component: HeiComponent,
    /// Share of recalls with no consumption (episodic only).
    nonconsumption: f64,
    /// Median amount on consumption days.
    median: f64,
    /// Approximate standard deviation of log amounts on consumption days.
    log_sd: f64,
    lambda: f64,
}

const fn spec(component: HeiComponent, nonconsumption: f64, median: f64, log_sd: f64, lambda: f64) -> ComponentSpec {
    ComponentSpec {
        component,
        nonconsumption,
        median,
        log_sd,
        lambda,
    }
}

const EPISODIC: [ComponentSpec; 6] = [
    spec(TotalFruit, 0.17, 1.1, 0.65, 0.25),
    spec(WholeFruit, 0.40, 0.8, 0.7, 0.25),
    spec(TotalVegetables, 0.03, 0.75, 0.7, 0.25),
    spec(Dol, 0.50, 0.12, 1.0, 0.1),
    spec(WholeGrains, 0.42, 0.6, 0.8, 0.2),
    spec(Milk, 0.12, 1.6, 0.6, 0.35),
];

const DAILY: [ComponentSpec; 6] = [
    spec(TotalGrains, 0.0, 5.5, 0.4, 0.4),
    spec(MeatBeans, 0.0, 3.0, 0.6, 0.3),
    spec(Oil, 0.0, 11.0, 0.7, 0.3),
    spec(SaturatedFat, 0.0, 21.0, 0.4, 0.4),
    spec(Sodium, 0.0, 2400.0, 0.35, 0.5),
    spec(Sofaas, 0.0, 600.0, 0.4, 0.4),
];

const ENERGY_MEDIAN: f64 = 1700.0;
const ENERGY_LOG_SD: f64 = 0.3;
const ENERGY_LAMBDA: f64 = 0.5;

fn transform_for(median: f64, log_sd: f64, lambda: f64) -> TransformSpec {
    let mu = boxcox(median, lambda).expect("positive median");
    // Delta method: sd of boxcox(y) is about median^lambda * sd(log y).
    TransformSpec::new(lambda, mu, log_sd * median.powf(lambda)).expect("positive sigma")
}

/// Indicator intercept giving the target consumption rate once averaged
/// over the default covariate distribution and the random effect.
fn calibrate_intercept(target_consumption: f64, slopes: &[f64; 4], u_var: f64) -> f64 {
    let scale = (1.0 + u_var).sqrt();
    let marginal = |b0: f64| {
        let ages: Vec<f64> = (0..40).map(|k| -1.0 + (k as f64 + 0.5) / 20.0).collect();
        let mut acc = 0.0;
        for female in [0.0, 1.0] {
            for (weekend, pw) in [(0.0, 1.0 - WEEKEND_PROB), (1.0, WEEKEND_PROB)] {
                for second in [0.0, 1.0] {
                    for &age in &ages {
                        let eta = b0 + slopes[0] * female + slopes[1] * age + slopes[2] * weekend + slopes[3] * second;
                        acc += 0.5 * pw * 0.5 * norm_cdf(eta / scale) / ages.len() as f64;
                    }
                }
            }
        }
        acc
    };
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if marginal(mid) < target_consumption {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn paper_like() -> ModelParams {
    let layout = VariableLayout::full();
    let design = CovariateDesign::new(vec!["female".into(), "age".into()]);
    let p = layout.p();
    let q = design.q();

    let u_var = |j: usize| -> f64 {
        match layout.kind(j) {
            VariableKind::Indicator(_) => 0.5,
            VariableKind::Amount(_) => 0.6,
            VariableKind::Daily(_) => 0.7,
            VariableKind::Energy => 0.8,
        }
    };
    let eps_var = |j: usize| -> f64 {
        match layout.kind(j) {
            VariableKind::Indicator(_) => 1.0,
            VariableKind::Amount(_) => 1.4,
            VariableKind::Daily(_) => 1.3,
            VariableKind::Energy => 1.2,
        }
    };

    let energy = layout.energy();
    let same_food = |a: usize, b: usize| match (layout.kind(a), layout.kind(b)) {
        (VariableKind::Indicator(x), VariableKind::Amount(y))
        | (VariableKind::Amount(x), VariableKind::Indicator(y)) => x == y,
        _ => false,
    };

    let mut sigma_u = DMatrix::<f64>::zeros(p, p);
    let mut sigma_eps = DMatrix::<f64>::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let (ru, re) = if a == b {
                (1.0, 1.0)
            } else if same_food(a, b) {
                (0.4, 0.0)
            } else if (a == energy || b == energy) && !layout.is_indicator(a) && !layout.is_indicator(b) {
                (0.3, 0.3)
            } else {
                (0.15, 0.1)
            };
            sigma_u[(a, b)] = ru * (u_var(a) * u_var(b)).sqrt();
            sigma_eps[(a, b)] = re * (eps_var(a) * eps_var(b)).sqrt();
        }
    }

    let mut beta = DMatrix::<f64>::zeros(p, q);
    let mut transforms = Vec::with_capacity(layout.n_transformed());
    for (l, c) in EPISODIC.iter().enumerate() {
        debug_assert_eq!(layout.episodic()[l], c.component);
        let ind = layout.indicator(l);
        let amt = layout.amount(l);
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let slopes = [0.05 * sign, 0.1 * sign, -0.1, -0.05];
        beta[(ind, 0)] = calibrate_intercept(1.0 - c.nonconsumption, &slopes, u_var(ind));
        for (k, s) in slopes.iter().enumerate() {
            beta[(ind, k + 1)] = *s;
        }
        let amt_slopes = [-0.1 * sign, 0.2, 0.1, -0.1];
        for (k, s) in amt_slopes.iter().enumerate() {
            beta[(amt, k + 1)] = *s;
        }
        transforms.push(transform_for(c.median, c.log_sd, c.lambda));
    }
    for (l, c) in DAILY.iter().enumerate() {
        debug_assert_eq!(layout.daily()[l], c.component);
        let j = layout.daily_index(l);
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let slopes = [-0.1 * sign, 0.2, 0.1 * sign, -0.1];
        for (k, s) in slopes.iter().enumerate() {
            beta[(j, k + 1)] = *s;
        }
        transforms.push(transform_for(c.median, c.log_sd, c.lambda));
    }
    let energy_slopes = [-0.2, 0.3, 0.1, -0.1];
    for (k, s) in energy_slopes.iter().enumerate() {
        beta[(energy, k + 1)] = *s;
    }
    transforms.push(transform_for(ENERGY_MEDIAN, ENERGY_LOG_SD, ENERGY_LAMBDA));

    let params = ModelParams {
        layout,
        design,
        beta,
        sigma_u,
        sigma_eps,
        transforms,
    };
    params.validate().expect("paper-like preset is valid");
    params
}

/// Restrict parameters to a sublayout whose components all appear in the
/// source layout with the same role.
pub fn restrict(params: &ModelParams, target: &VariableLayout) -> Result<ModelParams> {
    let src = &params.layout;
    let mut index = Vec::with_capacity(target.p());
    let mut transforms = Vec::with_capacity(target.n_transformed());
    for j in 0..target.p() {
        let source_j = match target.kind(j) {
            VariableKind::Energy => src.energy(),
            kind => {
                let c = target.component(j).expect("non-energy variable has a component");
                let pos = |list: &[HeiComponent]| list.iter().position(|&x| x == c);
                match kind {
                    VariableKind::Indicator(_) => pos(src.episodic()).map(|l| src.indicator(l)),
                    VariableKind::Amount(_) => pos(src.episodic()).map(|l| src.amount(l)),
                    _ => pos(src.daily()).map(|l| src.daily_index(l)),
                }
                .ok_or_else(|| {
                    Error::validation(format!("{c} is not modeled with the same role in the source layout"))
                })?
            }
        };
        index.push(source_j);
    }
    for t in 0..target.n_transformed() {
        let j = target.transformed_variable(t);
        transforms.push(*params.transform_for(index[j]).expect("transformed"));
    }
    let p = target.p();
    let sub = |m: &DMatrix<f64>| DMatrix::from_fn(p, p, |a, b| m[(index[a], index[b])]);
    let out = ModelParams {
        layout: target.clone(),
        design: params.design.clone(),
        beta: DMatrix::from_fn(p, params.design.q(), |a, k| params.beta[(index[a], k)]),
        sigma_u: sub(&params.sigma_u),
        sigma_eps: sub(&params.sigma_eps),
        transforms,
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;

    #[test]
    fn presets_validate() {
        for preset in [Preset::PaperLike, Preset::P5, Preset::P9] {
            let params = preset.params();
            params.validate().unwrap();
            assert_eq!(params.p(), preset.layout().p());
            assert!(min_eigenvalue(&params.sigma_u) > 0.0);
        }
        assert_eq!(Preset::P5.layout().p(), 5);
        assert_eq!(Preset::P9.layout().p(), 9);
    }

    #[test]
    fn restricted_blocks_match_full() {
        let full = Preset::PaperLike.params();
        let p5 = Preset::P5.params();
        // p5 variables are the first four of the full layout plus energy.
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(p5.sigma_u[(a, b)], full.sigma_u[(a, b)]);
            }
            assert_eq!(p5.sigma_eps[(a, 4)], full.sigma_eps[(a, 18)]);
        }
    }

    #[test]
    fn preset_names_parse() {
        for preset in [Preset::PaperLike, Preset::P5, Preset::P9] {
            assert_eq!(preset.name().parse::<Preset>().unwrap(), preset);
        }
        assert!("p7".parse::<Preset>().is_err());
    }
}
