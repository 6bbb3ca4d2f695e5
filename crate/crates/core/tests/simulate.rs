mod common;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use hei_usual::io;
use hei_usual::model::{ModelParams, VariableKind};
use hei_usual::simulate::{
    make_design, simulate_dataset, FixedCovariates, Preset, RecallPlan, WeightScheme, AMOUNT_FLOOR,
};
use hei_usual::stats::{norm_cdf, pearson};
use hei_usual::transform::g_tr;

fn fixed_covs() -> FixedCovariates {
    FixedCovariates {
        values: vec![1.0, 0.2],
        weekend_prob: 0.0,
    }
}

/// P5 with every fixed effect zero except the given indicator intercepts.
fn intercept_only(intercepts: [f64; 2]) -> ModelParams {
    let mut params = Preset::P5.params();
    params.beta.fill(0.0);
    params.beta[(0, 0)] = intercepts[0];
    params.beta[(2, 0)] = intercepts[1];
    params
}

/// `E[Phi(b0 + s Z)]` by the trapezoid rule on [-10, 10].
fn probit_marginal(b0: f64, u_var: f64) -> f64 {
    let n = 20_000;
    let h = 20.0 / n as f64;
    let s = u_var.sqrt();
    (0..=n)
        .map(|k| {
            let z = -10.0 + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * norm_cdf(b0 + s * z) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })
        .sum::<f64>()
        * h
}

#[test]
fn zero_coupling_holds_exhaustively() {
    let params = Preset::PaperLike.params();
    let data = common::simulated(&params, 20, 10, WeightScheme::Equal, 5);
    let layout = &data.layout;
    let mut consumed = 0;
    for r in data.persons.iter().flat_map(|p| &p.recalls) {
        for l in 0..layout.n_episodic() {
            let (ind, amt) = (r.values[layout.indicator(l)], r.values[layout.amount(l)]);
            assert!(ind == 0.0 || ind == 1.0);
            assert_eq!(ind == 0.0, amt == 0.0, "indicator {ind}, amount {amt}");
            if ind == 1.0 {
                consumed += 1;
                assert!(amt >= AMOUNT_FLOOR);
            }
        }
        for j in 0..layout.p() {
            if matches!(layout.kind(j), VariableKind::Daily(_) | VariableKind::Energy) {
                assert!(r.values[j] >= AMOUNT_FLOOR);
            }
        }
    }
    assert!(consumed > 0);
    data.validate().unwrap();
}

#[test]
fn marginal_consumption_matches_probit_integral() {
    let params = intercept_only([0.4, -0.3]);
    let design = make_design(1250, 2, WeightScheme::Equal, 8).unwrap();
    let data = simulate_dataset(&params, &design, &fixed_covs(), RecallPlan::default(), 9).unwrap();
    let n = data.n_persons() as f64;
    for (ind, b0) in [(0, 0.4), (2, -0.3)] {
        let u_var = params.sigma_u[(ind, ind)];
        let oracle = probit_marginal(b0, u_var);
        // Closed form of the same integral.
        assert!((oracle - norm_cdf(b0 / (1.0 + u_var).sqrt())).abs() < 1e-10);
        let rate = data.persons.iter().filter(|p| p.recalls[0].values[ind] == 1.0).count() as f64 / n;
        assert!(
            (rate - oracle).abs() < 2.0 / n.sqrt(),
            "indicator {ind}: {rate} vs {oracle}"
        );
    }
}

#[test]
fn huge_intercept_means_always_consumed() {
    let params = intercept_only([10.0, 0.0]);
    let design = make_design(50, 5, WeightScheme::Equal, 1).unwrap();
    let data = simulate_dataset(&params, &design, &fixed_covs(), RecallPlan::default(), 2).unwrap();
    assert!(data
        .persons
        .iter()
        .flat_map(|p| &p.recalls)
        .all(|r| r.values[0] == 1.0 && r.values[1] > 0.0));
}

#[test]
fn independent_recalls_without_person_effects() {
    let mut params = Preset::P5.params();
    params.sigma_u = DMatrix::zeros(5, 5);
    params.sigma_eps = DMatrix::identity(5, 5);
    let design = make_design(500, 2, WeightScheme::Equal, 3).unwrap();
    let data = simulate_dataset(&params, &design, &fixed_covs(), RecallPlan::default(), 4).unwrap();
    let energy = params.layout.energy();
    let spec = params.transform_for(energy).unwrap();
    let (first, second): (Vec<f64>, Vec<f64>) = data
        .persons
        .iter()
        .map(|p| {
            (
                g_tr(p.recalls[0].values[energy], spec).unwrap(),
                g_tr(p.recalls[1].values[energy], spec).unwrap(),
            )
        })
        .unzip();
    let r = pearson(&first, &second).unwrap();
    assert!(r.abs() < 0.05, "autocorrelation {r}");
}

#[test]
fn paper_like_nonconsumption_rates() {
    let params = Preset::PaperLike.params();
    let data = common::simulated(&params, 250, 10, WeightScheme::Equal, 21);
    assert_eq!(data.n_persons(), 5000);
    let layout = &data.layout;
    let keys: Vec<&str> = layout.episodic().iter().map(|c| c.key()).collect();
    assert_eq!(
        keys,
        [
            "total_fruit",
            "whole_fruit",
            "total_vegetables",
            "dol",
            "whole_grains",
            "milk"
        ]
    );
    let targets = [0.17, 0.40, 0.03, 0.50, 0.42, 0.12];
    let recalls: Vec<_> = data.persons.iter().flat_map(|p| &p.recalls).collect();
    for (l, target) in targets.iter().enumerate() {
        let ind = layout.indicator(l);
        let rate = recalls.iter().filter(|r| r.values[ind] == 0.0).count() as f64 / recalls.len() as f64;
        assert!((rate - target).abs() <= 0.03, "{}: {rate} vs {target}", keys[l]);
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let params = Preset::P9.params();
    let csv = |seed| {
        io::dataset_to_csv(&common::simulated(
            &params,
            6,
            5,
            WeightScheme::Lognormal { cv: 0.5 },
            seed,
        ))
        .unwrap()
    };
    assert_eq!(csv(17), csv(17));
    assert_ne!(csv(17), csv(18));
}

#[test]
fn lognormal_weights_golden_hash() {
    let design = make_design(16, 10, WeightScheme::Lognormal { cv: 0.5 }, 2026).unwrap();
    let mut hasher = Sha256::new();
    for w in design.weights() {
        hasher.update(w.to_bits().to_le_bytes());
    }
    let digest: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(
        digest,
        "e7b2bfb40986dcc3b06ec914647c293a5ef45e8bd256ea1e2cb141de52542d3c"
    );
}
