mod common;

use hei_usual::population::naive_profiles;
use hei_usual::replication::{brr_se, replicate_statistic, ReplicateWeights};
use hei_usual::simulate::{Preset, WeightScheme};

fn energy_values(data: &hei_usual::data::RecallDataset) -> Vec<f64> {
    let e = data.layout.energy();
    data.persons.iter().map(|p| p.recalls[0].values[e]).collect()
}

#[test]
fn weighted_total_balance_identity() {
    let params = Preset::P5.params();
    let data = common::simulated(&params, 32, 5, WeightScheme::Lognormal { cv: 0.5 }, 40);
    let design = data.survey_design().unwrap();
    let y = energy_values(&data);
    let total = |w: &[f64]| -> f64 { w.iter().zip(&y).map(|(w, y)| w * y).sum() };

    // Textbook stratified variance of a total with two PSUs per stratum.
    let mut psu_totals = std::collections::BTreeMap::<(u32, u32), f64>::new();
    for (p, y) in data.persons.iter().zip(&y) {
        *psu_totals.entry((p.stratum, p.psu)).or_default() += p.weight * y;
    }
    let strata: Vec<u32> = data
        .persons
        .iter()
        .map(|p| p.stratum)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let var: f64 = strata
        .iter()
        .map(|&h| {
            let d = psu_totals[&(h, 1)] - psu_totals[&(h, 2)];
            d * d
        })
        .sum();

    for fay in [0.0, 0.3, 0.5] {
        let reps = ReplicateWeights::build(&design, fay).unwrap();
        assert_eq!(reps.n_replicates(), 64);
        let full = total(&design.weights());
        let rep_totals: Vec<f64> = reps.weights.iter().map(|w| total(w)).collect();
        let avg = rep_totals.iter().sum::<f64>() / rep_totals.len() as f64;
        assert!((avg - full).abs() <= 1e-10 * full, "fay {fay}: {avg} vs {full}");
        let se = brr_se(full, &rep_totals, fay);
        assert!((se * se - var).abs() <= 1e-10 * var, "fay {fay}: {} vs {var}", se * se);
    }
}

#[test]
fn fay_and_plain_brr_agree_for_weighted_mean() {
    let params = Preset::P5.params();
    let data = common::simulated(&params, 32, 5, WeightScheme::Lognormal { cv: 0.5 }, 41);
    let design = data.survey_design().unwrap();
    let (profiles, weights) = naive_profiles(&data).unwrap();
    let totals: Vec<f64> = profiles.iter().map(|s| s.total).collect();
    let mean = |w: &[f64]| -> hei_usual::Result<Vec<f64>> {
        let sw: f64 = w.iter().sum();
        Ok(vec![w.iter().zip(&totals).map(|(w, t)| w * t).sum::<f64>() / sw])
    };
    let se = |fay| {
        let reps = ReplicateWeights::build(&design, fay).unwrap();
        replicate_statistic(&weights, &reps, mean).unwrap().1[0]
    };
    let (plain, fay) = (se(0.0), se(0.3));
    assert!(plain > 0.0);
    assert!((fay / plain - 1.0).abs() < 0.15, "plain {plain}, fay {fay}");
}
