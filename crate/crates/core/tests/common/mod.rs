#![allow(dead_code)]

use hei_usual::data::RecallDataset;
use hei_usual::model::ModelParams;
use hei_usual::simulate::{make_design, simulate_dataset, DefaultCovariates, Preset, RecallPlan, WeightScheme};

pub fn simulated(
    params: &ModelParams,
    strata: usize,
    per_psu: usize,
    scheme: WeightScheme,
    seed: u64,
) -> RecallDataset {
    let design = make_design(strata, per_psu, scheme, seed).unwrap();
    simulate_dataset(params, &design, &DefaultCovariates, RecallPlan::default(), seed + 1).unwrap()
}

pub fn small_p5(seed: u64) -> (ModelParams, RecallDataset) {
    let params = Preset::P5.params();
    let data = simulated(&params, 5, 10, WeightScheme::Equal, seed);
    (params, data)
}
