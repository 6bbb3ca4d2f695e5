mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use hei_usual::model::VariableKind;
use hei_usual::population::{
    naive_report, population_report, simulate_population, usual_intake, weighted_percentile, PopulationConfig,
};
use hei_usual::simulate::{make_design, simulate_dataset, FixedCovariates, Preset, RecallPlan, WeightScheme};

fn config(n_draws: usize, seed: u64) -> PopulationConfig {
    PopulationConfig {
        n_draws,
        seed,
        ..PopulationConfig::default()
    }
}

proptest! {
    #[test]
    fn percentiles_are_monotone(
        pairs in prop::collection::vec((-50.0f64..50.0, 0.0f64..5.0), 1..60),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        let (values, mut weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        weights[0] += 0.1;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let q_lo = weighted_percentile(&values, &weights, lo).unwrap();
        let q_hi = weighted_percentile(&values, &weights, hi).unwrap();
        prop_assert!(q_lo <= q_hi);
        prop_assert!(values.contains(&q_lo));
    }
}

#[test]
fn report_rows_are_ordered_and_bounded() {
    let (params, data) = common::small_p5(3);
    let w = data.normalized_weights();
    let report = population_report(&[params], &data, &w, &config(2000, 5)).unwrap();
    assert_eq!(report.rows.len(), 13);
    for row in &report.rows {
        assert!(row.percentiles.windows(2).all(|p| p[0] <= p[1]), "{}", row.label);
        assert!(row.values().iter().all(|v| (0.0..=100.0).contains(v)), "{}", row.label);
    }
    assert!((0.0..=1.0).contains(&report.prob_at_or_below));
}

#[test]
fn scaling_weights_leaves_report_unchanged() {
    let params = Preset::P5.params();
    let data = common::simulated(&params, 5, 10, WeightScheme::Lognormal { cv: 0.5 }, 4);
    let raw: Vec<f64> = data.persons.iter().map(|p| p.weight).collect();
    let base = population_report(std::slice::from_ref(&params), &data, &raw, &config(3000, 9)).unwrap();
    // Power-of-two scaling is exact in floating point.
    let doubled: Vec<f64> = raw.iter().map(|w| w * 8.0).collect();
    assert_eq!(
        population_report(std::slice::from_ref(&params), &data, &doubled, &config(3000, 9)).unwrap(),
        base
    );
    // Other factors may move a cumulative sum across a uniform draw by rounding only.
    let scaled: Vec<f64> = raw.iter().map(|w| w * 3.7).collect();
    let other = population_report(std::slice::from_ref(&params), &data, &scaled, &config(3000, 9)).unwrap();
    for (a, b) in base.flatten().iter().zip(other.flatten()) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
    let naive = naive_report(&data, &raw, 40.0).unwrap();
    let naive_scaled = naive_report(&data, &doubled, 40.0).unwrap();
    assert_eq!(naive, naive_scaled);
}

#[test]
fn no_person_effects_collapse_to_plug_in() {
    let mut params = Preset::P5.params();
    params.sigma_u = DMatrix::zeros(5, 5);
    let covs = FixedCovariates {
        values: vec![0.0, 0.5],
        weekend_prob: 3.0 / 7.0,
    };
    let design = make_design(4, 5, WeightScheme::Lognormal { cv: 0.5 }, 1).unwrap();
    let data = simulate_dataset(&params, &design, &covs, RecallPlan::default(), 2).unwrap();
    let w = data.normalized_weights();
    let report = population_report(std::slice::from_ref(&params), &data, &w, &config(500, 3)).unwrap();
    let intake = usual_intake(&params, &covs.values, &[0.0; 5], 3.0 / 7.0);
    let plug_in = hei_usual::scoring::score_profile(&intake).unwrap();
    let total = report.rows.last().unwrap();
    for v in total.values() {
        assert!((v - plug_in.total).abs() < 1e-9, "{v} vs {}", plug_in.total);
    }
}

#[test]
fn usual_intake_matches_long_run_average_of_recalls() {
    // With no person effects every recall of every person is a fresh draw
    // of the same day, so the recall average estimates the usual intake.
    let mut params = Preset::P5.params();
    params.sigma_u = DMatrix::zeros(5, 5);
    let covs = FixedCovariates {
        values: vec![1.0, -0.4],
        weekend_prob: 0.0,
    };
    let design = make_design(10_000, 2, WeightScheme::Equal, 5).unwrap();
    let plan = RecallPlan {
        recalls_per_person: 1,
        later_recall_prob: 1.0,
    };
    let data = simulate_dataset(&params, &design, &covs, plan, 6).unwrap();
    let intake = usual_intake(&params, &covs.values, &[0.0; 5], 0.0);
    let layout = &params.layout;
    let n = data.n_recalls() as f64;
    for j in 0..layout.p() {
        let expected = match layout.kind(j) {
            VariableKind::Indicator(_) => continue,
            VariableKind::Energy => intake.energy,
            _ => intake.amount(layout.component(j).unwrap()),
        };
        let observed = data.persons.iter().map(|p| p.recalls[0].values[j]).sum::<f64>() / n;
        let rel = (observed - expected).abs() / expected;
        assert!(
            rel < 0.03,
            "variable {j}: recall mean {observed}, usual intake {expected}"
        );
    }
}

#[test]
fn single_person_population() {
    let (params, data) = common::small_p5(6);
    let one = &data.persons[..1];
    let sample = simulate_population(std::slice::from_ref(&params), one, &[2.5], &config(200, 1)).unwrap();
    assert_eq!(sample.profiles.len(), 200);
    let mut frozen = params;
    frozen.sigma_u = DMatrix::zeros(5, 5);
    let sample = simulate_population(&[frozen], one, &[2.5], &config(50, 1)).unwrap();
    assert!(sample.profiles.iter().all(|s| s.total == sample.profiles[0].total));
}

#[test]
fn usual_intake_is_less_dispersed_than_single_recalls() {
    let params = Preset::PaperLike.params();
    let data = common::simulated(&params, 25, 10, WeightScheme::Equal, 12);
    let w = data.normalized_weights();
    let naive = naive_report(&data, &w, 40.0).unwrap();
    let usual = population_report(std::slice::from_ref(&params), &data, &w, &config(5000, 2)).unwrap();
    let spread = |r: &hei_usual::population::DistributionReport| {
        let t = r.rows.last().unwrap();
        t.percentiles[6] - t.percentiles[0]
    };
    assert!(
        spread(&usual) < spread(&naive),
        "usual {} naive {}",
        spread(&usual),
        spread(&naive)
    );

    // Larger between-person variation widens the usual-intake distribution.
    let mut wide = params.clone();
    wide.sigma_u *= 2.0;
    let wider = population_report(&[wide], &data, &w, &config(5000, 2)).unwrap();
    assert!(spread(&wider) > spread(&usual));
}
