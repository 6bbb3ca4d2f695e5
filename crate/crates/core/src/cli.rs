//! `hei` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hei_usual::config::RunConfig;
use hei_usual::data::RecallDataset;
use hei_usual::defaults::BRR_MIN_STRATA;
use hei_usual::error::Error;
use hei_usual::io::{self, EstimateDoc, EstimateKind, ReportMeta, StandardErrorDoc};
use hei_usual::model::ModelParams;
use hei_usual::population::{naive_report, population_report, DistributionReport};
use hei_usual::replication::{replicate_statistic, ReplicateWeights};
use hei_usual::sampler::{estimate_transforms, initial_params, run_chain, SamplerConfig};
use hei_usual::scoring::score_profile;
use hei_usual::simulate::{make_design, simulate_dataset, DefaultCovariates, Preset, WeightScheme};

/// Exit codes.
const EXIT_CONFIG: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Debug)]
enum CliError {
    Config(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Lib(Error::Numerical(_)) => EXIT_NUMERICAL,
            CliError::Lib(Error::Io { .. }) => EXIT_IO,
            CliError::Lib(_) => EXIT_VALIDATION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "hei",
    version,
    about = "HEI-2005 usual-intake scoring, simulation, fitting and reporting"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a recall survey from a parameter preset.
    Simulate(SimulateArgs),
    /// Fit the latent-variable model by MCMC.
    Fit(FitArgs),
    /// Usual-intake score distribution by population Monte Carlo.
    Estimate(EstimateArgs),
    /// Score distribution of each person's first recall.
    Naive(NaiveArgs),
    /// Score a batch of daily intakes.
    Score(ScoreArgs),
    /// BRR standard errors of an estimate or naive report.
    BrrSe(BrrArgs),
    /// Format an estimate (and optional standard errors) as the final table.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> CliResult<RunConfig> {
        match &self.config {
            None => Ok(RunConfig::default()),
            Some(path) => {
                let text = io::read_text(path)?;
                RunConfig::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Equal,
    Lognormal,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// paper-like, p5 or p9.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strata: Option<usize>,
    #[arg(long)]
    persons_per_psu: Option<usize>,
    #[arg(long, value_enum)]
    weights: Option<WeightArg>,
    /// Coefficient of variation for lognormal weights.
    #[arg(long, default_value_t = 0.5)]
    weight_cv: f64,
    /// Recall dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Design CSV (person, stratum, psu, weight) to write.
    #[arg(long)]
    design_out: Option<PathBuf>,
    /// Generating parameters JSON to write.
    #[arg(long)]
    params_out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Recall dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Design CSV replacing the dataset's strata, PSUs and weights.
    #[arg(long)]
    design: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> CliResult<RecallDataset> {
        let data = io::read_dataset(&self.data)?;
        let data = match &self.design {
            Some(path) => io::apply_design(&data, &io::read_design(path)?)?,
            None => data,
        };
        eprintln!(
            "read {} recalls for {} persons ({} variables, {} covariates)",
            data.n_recalls(),
            data.n_persons(),
            data.layout.p(),
            data.design.person.len()
        );
        Ok(data)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ignore survey weights.
    #[arg(long)]
    unweighted: bool,
    /// Take the Box-Cox transforms (and starting values) from this params JSON
    /// instead of estimating transforms from the data.
    #[arg(long)]
    start: Option<PathBuf>,
    /// Posterior draws (JSON lines) to write.
    #[arg(long)]
    draws_out: PathBuf,
    /// Posterior-mean parameters JSON to write.
    #[arg(long)]
    params_out: Option<PathBuf>,
    /// Per-draw diagnostics CSV to write.
    #[arg(long)]
    diagnostics_out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelSource {
    /// Parameters JSON (e.g. a posterior mean).
    #[arg(long, conflicts_with = "draws", required_unless_present = "draws")]
    params: Option<PathBuf>,
    /// Posterior draws JSON lines; the posterior mean is used unless --mix-draws.
    #[arg(long)]
    draws: Option<PathBuf>,
    /// Use a random posterior draw per Monte Carlo draw.
    #[arg(long, requires = "draws")]
    mix_draws: bool,
}

impl ModelSource {
    fn load(&self, mix_from_config: bool) -> CliResult<Vec<ModelParams>> {
        if let Some(p) = &self.params {
            return Ok(vec![io::read_params(p)?]);
        }
        let path = self.draws.as_ref().expect("clap enforces params or draws");
        let draws = io::read_draws(path)?;
        if self.mix_draws || mix_from_config {
            Ok(draws)
        } else {
            Ok(vec![ModelParams::mean_of(&draws)?])
        }
    }
}

#[derive(Args)]
struct PopulationArgs {
    /// Monte Carlo draws.
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    weekend_share: Option<f64>,
    /// Total-score cut-off for the low-score share.
    #[arg(long)]
    threshold: Option<f64>,
}

impl PopulationArgs {
    fn apply(&self, config: &mut RunConfig) {
        let e = &mut config.estimate;
        e.n_draws = self.n_mc.unwrap_or(e.n_draws);
        e.seed = self.seed.unwrap_or(e.seed);
        e.weekend_share = self.weekend_share.unwrap_or(e.weekend_share);
        e.threshold = self.threshold.unwrap_or(e.threshold);
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelSource,
    #[command(flatten)]
    population: PopulationArgs,
    /// Estimate JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NaiveArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    threshold: Option<f64>,
    /// Estimate JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Intake CSV: the twelve component keys and energy, optional leading id.
    #[arg(long)]
    input: PathBuf,
    /// Scores CSV to write; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Usual,
    Naive,
}

#[derive(Args)]
struct BrrArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "usual")]
    kind: KindArg,
    #[arg(long, conflicts_with = "draws")]
    params: Option<PathBuf>,
    #[arg(long)]
    draws: Option<PathBuf>,
    #[arg(long, requires = "draws")]
    mix_draws: bool,
    #[command(flatten)]
    population: PopulationArgs,
    /// Fay coefficient in [0, 1).
    #[arg(long)]
    fay: Option<f64>,
    /// Hold the parameters fixed and only re-weight the population Monte
    /// Carlo (fast; omits parameter uncertainty).
    #[arg(long)]
    no_refit: bool,
    /// Standard-error JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Estimate JSON from `estimate` or `naive`.
    #[arg(long)]
    estimate: PathBuf,
    /// Standard-error JSON from `brr-se`.
    #[arg(long)]
    se: Option<PathBuf>,
    /// Report CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Metadata JSON to write; defaults to the report path with `.meta.json`.
    #[arg(long)]
    meta_out: Option<PathBuf>,
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: configuration: cannot set up {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Estimate(a) => estimate(a),
        Command::Naive(a) => naive(a),
        Command::Score(a) => score(a),
        Command::BrrSe(a) => brr(a),
        Command::Report(a) => report(a),
    }
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let mut config = a.config.load()?.simulate;
    if let Some(p) = a.preset {
        config.preset = p;
    }
    config.seed = a.seed.unwrap_or(config.seed);
    config.strata = a.strata.unwrap_or(config.strata);
    config.persons_per_psu = a.persons_per_psu.unwrap_or(config.persons_per_psu);
    match a.weights {
        Some(WeightArg::Equal) => config.weights = WeightScheme::Equal,
        Some(WeightArg::Lognormal) => config.weights = WeightScheme::Lognormal { cv: a.weight_cv },
        None => {}
    }
    let preset: Preset = config
        .preset
        .parse()
        .map_err(|e: Error| CliError::Config(e.to_string()))?;
    let params = preset.params();
    let design = make_design(config.strata, config.persons_per_psu, config.weights, config.seed)?;
    let data = simulate_dataset(&params, &design, &DefaultCovariates, config.recalls, config.seed)?;
    io::write_dataset(&a.out, &data)?;
    if let Some(p) = &a.design_out {
        io::write_design(p, &data.survey_design()?)?;
    }
    if let Some(p) = &a.params_out {
        io::write_params(p, &params)?;
    }
    eprintln!(
        "simulated {} persons, {} recalls ({} preset, seed {})",
        data.n_persons(),
        data.n_recalls(),
        preset.name(),
        config.seed
    );
    Ok(())
}

fn fit(a: FitArgs) -> CliResult<()> {
    let mut config: SamplerConfig = a.config.load()?.fit;
    config.iterations = a.iterations.unwrap_or(config.iterations);
    config.burn_in = a.burn_in.unwrap_or(config.burn_in);
    config.thin = a.thin.unwrap_or(config.thin);
    config.seed = a.seed.unwrap_or(config.seed);
    if a.unweighted {
        config.use_weights = false;
    }
    let data = a.data.load()?;
    config
        .validate(data.layout.p())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let init = match &a.start {
        Some(path) => {
            let start = io::read_params(path)?;
            if start.layout != data.layout || start.design != data.design {
                return Err(Error::validation(format!(
                    "{}: variables or covariates differ from the dataset",
                    path.display()
                ))
                .into());
            }
            start
        }
        None => initial_params(&data, estimate_transforms(&data)?)?,
    };
    let draws = run_chain(&data, init, &config)?;
    io::write_draws(&a.draws_out, &draws)?;
    if let Some(p) = &a.params_out {
        io::write_params(p, &draws.posterior_mean()?)?;
    }
    if let Some(p) = &a.diagnostics_out {
        io::write_text(p, &io::diagnostics_to_csv(&draws.trace)?)?;
    }
    let rates: Vec<String> = draws.acceptance.iter().map(|r| format!("{r:.2}")).collect();
    eprintln!(
        "kept {} draws; within-person covariance acceptance by block: {}",
        draws.draws.len(),
        rates.join(" ")
    );
    Ok(())
}

fn estimate(a: EstimateArgs) -> CliResult<()> {
    let mut config = a.config.load()?;
    a.population.apply(&mut config);
    let pop = config.estimate.population();
    pop.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let data = a.data.load()?;
    let params = a.model.load(config.estimate.mix_draws)?;
    let report = population_report(&params, &data, &data.normalized_weights(), &pop)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let doc = EstimateDoc {
        schema: io::ESTIMATE_SCHEMA.to_string(),
        kind: EstimateKind::Usual,
        n: report.n,
        seed: Some(pop.seed),
        weekend_share: Some(pop.weekend_share),
        report,
    };
    io::write_json(&a.out, &doc)?;
    Ok(())
}

fn naive(a: NaiveArgs) -> CliResult<()> {
    let config = a.config.load()?;
    let threshold = a.threshold.unwrap_or(config.estimate.threshold);
    let data = a.data.load()?;
    let report = naive_report(&data, &data.normalized_weights(), threshold)?;
    let doc = EstimateDoc {
        schema: io::ESTIMATE_SCHEMA.to_string(),
        kind: EstimateKind::Naive,
        n: report.n,
        seed: None,
        weekend_share: None,
        report,
    };
    io::write_json(&a.out, &doc)?;
    Ok(())
}

fn score(a: ScoreArgs) -> CliResult<()> {
    let (ids, intakes) = io::parse_intakes(&io::read_text(&a.input)?)?;
    let scores = intakes.iter().map(score_profile).collect::<Result<Vec<_>, _>>()?;
    io::emit(a.out.as_deref(), &io::scores_to_csv(&ids, &scores)?)?;
    Ok(())
}

fn brr(a: BrrArgs) -> CliResult<()> {
    let mut config = a.config.load()?;
    a.population.apply(&mut config);
    let fay = a.fay.unwrap_or(config.brr.fay);
    let refit = config.brr.refit && !a.no_refit;
    let pop = config.estimate.population();
    pop.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let data = a.data.load()?;
    let design = data.survey_design()?;
    if design.n_strata() < BRR_MIN_STRATA {
        eprintln!(
            "warning: only {} strata; BRR standard errors of percentiles are unstable below {BRR_MIN_STRATA}",
            design.n_strata()
        );
    }
    let replicates = ReplicateWeights::build(&design, fay)?;
    let full_weights = data.normalized_weights();
    // Every statistic below is invariant to the scale of the weights, so
    // replicates built from raw weights compare directly with the full sample.
    let raw: Vec<f64> = data.persons.iter().map(|p| p.weight).collect();
    let kind = match a.kind {
        KindArg::Usual => EstimateKind::Usual,
        KindArg::Naive => EstimateKind::Naive,
    };
    let (template, se): (DistributionReport, Vec<f64>) = match kind {
        EstimateKind::Naive => {
            let stat = |w: &[f64]| naive_report(&data, w, pop.threshold).map(|r| r.flatten());
            let (_, se) = replicate_statistic(&raw, &replicates, stat)?;
            (naive_report(&data, &full_weights, pop.threshold)?, se)
        }
        EstimateKind::Usual => {
            let source = ModelSource {
                params: a.params.clone(),
                draws: a.draws.clone(),
                mix_draws: a.mix_draws,
            };
            if source.params.is_none() && source.draws.is_none() {
                return Err(CliError::Config(
                    "usual-intake standard errors need --params or --draws".into(),
                ));
            }
            let params = source.load(config.estimate.mix_draws)?;
            let fit_config = config.fit.clone();
            let stat = |w: &[f64]| -> hei_usual::Result<Vec<f64>> {
                let fitted = if refit {
                    let reweighted = data.with_weights(w)?;
                    let start = ModelParams::mean_of(&params)?;
                    let draws = run_chain(&reweighted, start, &fit_config)?;
                    vec![draws.posterior_mean()?]
                } else {
                    params.clone()
                };
                population_report(&fitted, &data, w, &pop).map(|r| r.flatten())
            };
            let (_, se) = replicate_statistic(&raw, &replicates, stat)?;
            (population_report(&params, &data, &full_weights, &pop)?, se)
        }
    };
    let rows = StandardErrorDoc::from_flat(&template, &se)?;
    let doc = StandardErrorDoc {
        schema: io::SE_SCHEMA.to_string(),
        kind,
        fay,
        n_strata: design.n_strata(),
        n_replicates: replicates.n_replicates(),
        refit,
        rows,
        prob_at_or_below: *se.last().expect("non-empty statistic"),
    };
    io::write_json(&a.out, &doc)?;
    eprintln!(
        "{} replicates over {} strata (Fay {fay})",
        replicates.n_replicates(),
        design.n_strata()
    );
    Ok(())
}

fn report(a: ReportArgs) -> CliResult<()> {
    let est = io::read_estimate(&a.estimate)?;
    let se = a.se.as_deref().map(io::read_standard_errors).transpose()?;
    if let Some(se) = &se {
        if se.kind != est.kind {
            return Err(Error::validation("standard errors and estimate are of different kinds").into());
        }
    }
    let table = io::report_to_csv(&est.report, se.as_ref().map(|s| s.rows.as_slice()))?;
    io::write_text(&a.out, &table)?;
    let meta = ReportMeta {
        schema: io::REPORT_META_SCHEMA.to_string(),
        kind: est.kind,
        n: est.n,
        seed: est.seed,
        weekend_share: est.weekend_share,
        threshold: est.report.threshold,
        prob_at_or_below: est.report.prob_at_or_below,
        prob_at_or_below_se: se.as_ref().map(|s| s.prob_at_or_below),
        fay: se.as_ref().map(|s| s.fay),
        n_replicates: se.as_ref().map(|s| s.n_replicates),
        warnings: est.report.warnings.clone(),
    };
    let meta_path = a.meta_out.unwrap_or_else(|| meta_path_for(&a.out));
    io::write_json(&meta_path, &meta)?;
    println!(
        "P(total <= {}) = {:.4}",
        est.report.threshold, est.report.prob_at_or_below
    );
    Ok(())
}

fn meta_path_for(report: &Path) -> PathBuf {
    let mut name = report.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    report.with_file_name(name)
}
