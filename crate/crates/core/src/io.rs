//! File formats. Every CSV starts with a `#schema=<name>` line; JSON
//! documents carry a `schema` field.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{value_problems, DesignUnit, Person, Recall, RecallDataset, SurveyDesign};
use crate::defaults::REPORT_PERCENTILES;
use crate::error::{Error, Result};
use crate::model::{CovariateDesign, ModelParams, VariableLayout};
use crate::population::{DistributionReport, ReportRow};
use crate::sampler::{PosteriorDraws, SamplerConfig, TraceRow};
use crate::scoring::{HeiComponent, IntakeVector, ScoreProfile, N_COMPONENTS};

pub const DATASET_SCHEMA: &str = "hei-usual/recalls/1";
pub const DESIGN_SCHEMA: &str = "hei-usual/design/1";
pub const DRAWS_SCHEMA: &str = "hei-usual/draws/1";
pub const DIAGNOSTICS_SCHEMA: &str = "hei-usual/diagnostics/1";
pub const ESTIMATE_SCHEMA: &str = "hei-usual/estimate/1";
pub const SE_SCHEMA: &str = "hei-usual/standard-errors/1";
pub const REPORT_SCHEMA: &str = "hei-usual/report/1";
pub const REPORT_META_SCHEMA: &str = "hei-usual/report-meta/1";
pub const INTAKE_SCHEMA: &str = "hei-usual/intakes/1";
pub const SCORES_SCHEMA: &str = "hei-usual/scores/1";

/// Fixed leading columns of the dataset CSV.
pub const DATASET_FIXED_COLUMNS: [&str; 7] = ["person_id", "recall", "weekend", "sequence", "stratum", "psu", "weight"];

/// Column headers of the report table.
pub const REPORT_COLUMNS: [&str; 9] = [
    "Component",
    "Mean",
    "5th",
    "10th",
    "25th",
    "50th",
    "75th",
    "90th",
    "95th",
];

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Strip and check the `#schema=` first line; returns the remaining text.
fn split_schema<'a>(text: &'a str, expected: &str, what: &str) -> Result<&'a str> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    match first.trim_end_matches('\r').strip_prefix("#schema=") {
        Some(s) if s.trim() == expected => Ok(rest),
        Some(s) => Err(Error::validation(format!(
            "{what}: unsupported schema `{}`, expected `{expected}`",
            s.trim()
        ))),
        None => Err(Error::validation(format!(
            "{what}: first line must be `#schema={expected}`"
        ))),
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_to_string(schema: &str, header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
    let mut out = format!("#schema={schema}\n").into_bytes();
    out.extend(body);
    String::from_utf8(out).map_err(|e| Error::validation(e.to_string()))
}

fn parse_f64(s: &str, line: u64, column: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("line {line}: column `{column}`: `{s}` is not a finite number"))
}

fn parse_u32(s: &str, line: u64, column: &str) -> std::result::Result<u32, String> {
    s.parse::<u32>()
        .map_err(|_| format!("line {line}: column `{column}`: `{s}` is not a non-negative integer"))
}

fn parse_flag(s: &str, line: u64, column: &str) -> std::result::Result<bool, String> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format!("line {line}: column `{column}`: expected 0 or 1, got `{s}`")),
    }
}

/// Map dietary column names to a layout; everything else after the fixed
/// columns is a person covariate.
fn layout_from_header(names: &[&str]) -> Result<(VariableLayout, Vec<usize>, Vec<String>, Vec<usize>)> {
    let mut episodic = Vec::new();
    let mut daily = Vec::new();
    let mut covariates = Vec::new();
    let mut covariate_cols = Vec::new();
    let mut has_energy = false;
    for (col, &name) in names.iter().enumerate() {
        if DATASET_FIXED_COLUMNS.contains(&name) {
            continue;
        }
        if name == "energy" {
            has_energy = true;
        } else if let Some(key) = name.strip_suffix("_consumed") {
            let c: HeiComponent = key.parse()?;
            if !names.contains(&format!("{key}_amount").as_str()) {
                return Err(Error::validation(format!(
                    "column `{name}` has no matching `{key}_amount` column"
                )));
            }
            episodic.push(c);
        } else if let Some(key) = name.strip_suffix("_amount") {
            let _: HeiComponent = key.parse()?;
            if !names.contains(&format!("{key}_consumed").as_str()) {
                return Err(Error::validation(format!(
                    "column `{name}` has no matching `{key}_consumed` column"
                )));
            }
        } else if let Ok(c) = name.parse::<HeiComponent>() {
            daily.push(c);
        } else {
            covariates.push(name.to_string());
            covariate_cols.push(col);
        }
    }
    if !has_energy {
        return Err(Error::validation("dataset has no `energy` column"));
    }
    let layout = VariableLayout::new(episodic, daily)?;
    let mut dietary_cols = Vec::with_capacity(layout.p());
    for name in layout.column_names() {
        let col = names.iter().position(|&n| n == name).expect("column named in header");
        dietary_cols.push(col);
    }
    Ok((layout, dietary_cols, covariates, covariate_cols))
}

/// Maximum number of row errors listed in one message.
const MAX_REPORTED_ERRORS: usize = 50;

fn collect_errors(errors: Vec<String>, what: &str) -> Result<()> {
    if errors.is_empty() {
        return Ok(());
    }
    let n = errors.len();
    let mut msg = format!("{what}: {n} problem(s)\n  ");
    msg.push_str(
        &errors
            .iter()
            .take(MAX_REPORTED_ERRORS)
            .cloned()
            .collect::<Vec<_>>()
            .join("\n  "),
    );
    if n > MAX_REPORTED_ERRORS {
        msg.push_str(&format!("\n  ... {} more", n - MAX_REPORTED_ERRORS));
    }
    Err(Error::validation(msg))
}

/// Parse a recall dataset. Every row is checked; all problems are reported
/// together with their line numbers.
pub fn parse_dataset(text: &str) -> Result<RecallDataset> {
    let body = split_schema(text, DATASET_SCHEMA, "dataset")?;
    let mut reader = csv_reader(body);
    let header = reader.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    for fixed in DATASET_FIXED_COLUMNS {
        if !names.contains(&fixed) {
            return Err(Error::validation(format!("dataset has no `{fixed}` column")));
        }
    }
    let mut seen_names = std::collections::HashSet::new();
    if let Some(dup) = names.iter().find(|n| !seen_names.insert(**n)) {
        return Err(Error::validation(format!("dataset column `{dup}` appears twice")));
    }
    let col = |name: &str| names.iter().position(|&n| n == name).expect("checked above");
    let fixed: Vec<usize> = DATASET_FIXED_COLUMNS.iter().map(|n| col(n)).collect();
    let (layout, dietary_cols, covariate_names, covariate_cols) = layout_from_header(&names)?;
    let value_names = layout.column_names();

    let mut persons: Vec<Person> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut errors = Vec::new();
    for record in reader.records() {
        let record = record?;
        // Header is line 2 after the schema line.
        let line = record.position().map_or(0, |p| p.line() + 1);
        let field = |c: usize| record.get(c).unwrap_or("");
        let mut row_errors = Vec::new();
        let mut take = |r: std::result::Result<f64, String>| {
            r.unwrap_or_else(|e| {
                row_errors.push(e);
                f64::NAN
            })
        };
        let values: Vec<f64> = dietary_cols
            .iter()
            .zip(&value_names)
            .map(|(&c, n)| take(parse_f64(field(c), line, n)))
            .collect();
        let covs: Vec<f64> = covariate_cols
            .iter()
            .zip(&covariate_names)
            .map(|(&c, n)| take(parse_f64(field(c), line, n)))
            .collect();
        let weight = take(parse_f64(field(fixed[6]), line, "weight"));
        let ints = [1, 4, 5].map(|k| parse_u32(field(fixed[k]), line, DATASET_FIXED_COLUMNS[k]));
        let flags = [2, 3].map(|k| parse_flag(field(fixed[k]), line, DATASET_FIXED_COLUMNS[k]));
        let person_id = field(fixed[0]).to_string();
        if person_id.is_empty() {
            row_errors.push(format!("line {line}: empty person_id"));
        }
        let (Ok(recall_index), Ok(stratum), Ok(psu)) = (&ints[0], &ints[1], &ints[2]) else {
            row_errors.extend(ints.iter().filter_map(|r| r.as_ref().err().cloned()));
            row_errors.extend(flags.iter().filter_map(|r| r.as_ref().err().cloned()));
            errors.extend(row_errors);
            continue;
        };
        let (Ok(weekend), Ok(second)) = (&flags[0], &flags[1]) else {
            row_errors.extend(flags.iter().filter_map(|r| r.as_ref().err().cloned()));
            errors.extend(row_errors);
            continue;
        };
        if !row_errors.is_empty() {
            errors.extend(row_errors);
            continue;
        }
        if *recall_index == 0 {
            errors.push(format!("line {line}: recall index must be >= 1"));
        }
        if weight < 0.0 {
            errors.push(format!("line {line}: weight must be >= 0"));
        }
        errors.extend(
            value_problems(&layout, &values)
                .into_iter()
                .map(|m| format!("line {line}: {m}")),
        );
        let recall = Recall {
            index: *recall_index,
            weekend: *weekend,
            second: *second,
            values,
        };
        match index.get(&person_id) {
            Some(&i) => {
                let p = &mut persons[i];
                if p.stratum != *stratum || p.psu != *psu || p.weight != weight || p.covariates != covs {
                    errors.push(format!(
                        "line {line}: person {person_id} has different stratum, psu, weight or covariates than on an earlier row"
                    ));
                }
                if p.recalls.iter().any(|r| r.index == recall.index) {
                    errors.push(format!(
                        "line {line}: person {person_id} repeats recall {}",
                        recall.index
                    ));
                }
                p.recalls.push(recall);
            }
            None => {
                index.insert(person_id.clone(), persons.len());
                persons.push(Person {
                    id: person_id,
                    covariates: covs,
                    weight,
                    stratum: *stratum,
                    psu: *psu,
                    recalls: vec![recall],
                });
            }
        }
    }
    collect_errors(errors, "dataset")?;
    let data = RecallDataset {
        layout,
        design: CovariateDesign::new(covariate_names),
        persons,
    };
    data.validate()?;
    Ok(data)
}

pub fn read_dataset(path: &Path) -> Result<RecallDataset> {
    parse_dataset(&read_text(path)?).map_err(|e| prefix(e, path))
}

fn prefix(e: Error, path: &Path) -> Error {
    match e {
        Error::Validation(m) => Error::validation(format!("{}: {m}", path.display())),
        Error::Domain(m) => Error::domain(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn dataset_to_csv(data: &RecallDataset) -> Result<String> {
    let mut header: Vec<String> = DATASET_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(data.design.person.iter().cloned());
    header.extend(data.layout.column_names());
    let mut rows = Vec::with_capacity(data.n_recalls());
    for p in &data.persons {
        for r in &p.recalls {
            let mut row = vec![
                p.id.clone(),
                r.index.to_string(),
                u8::from(r.weekend).to_string(),
                u8::from(r.second).to_string(),
                p.stratum.to_string(),
                p.psu.to_string(),
                fmt_f64(p.weight),
            ];
            row.extend(p.covariates.iter().map(|&c| fmt_f64(c)));
            row.extend(r.values.iter().map(|&v| fmt_f64(v)));
            rows.push(row);
        }
    }
    csv_to_string(DATASET_SCHEMA, &header, &rows)
}

pub fn write_dataset(path: &Path, data: &RecallDataset) -> Result<()> {
    write_text(path, &dataset_to_csv(data)?)
}

pub fn design_to_csv(design: &SurveyDesign) -> Result<String> {
    let header: Vec<String> = ["person_id", "stratum", "psu", "weight"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = design
        .units()
        .iter()
        .map(|u| {
            vec![
                u.person_id.clone(),
                u.stratum.to_string(),
                u.psu.to_string(),
                fmt_f64(u.weight),
            ]
        })
        .collect();
    csv_to_string(DESIGN_SCHEMA, &header, &rows)
}

pub fn write_design(path: &Path, design: &SurveyDesign) -> Result<()> {
    write_text(path, &design_to_csv(design)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignRow {
    person_id: String,
    stratum: u32,
    psu: u32,
    weight: f64,
}

pub fn parse_design(text: &str) -> Result<SurveyDesign> {
    let body = split_schema(text, DESIGN_SCHEMA, "design")?;
    let mut units = Vec::new();
    for row in csv_reader(body).deserialize::<DesignRow>() {
        let r = row?;
        units.push(DesignUnit {
            person_id: r.person_id,
            stratum: r.stratum,
            psu: r.psu,
            weight: r.weight,
        });
    }
    SurveyDesign::new(units)
}

pub fn read_design(path: &Path) -> Result<SurveyDesign> {
    parse_design(&read_text(path)?).map_err(|e| prefix(e, path))
}

/// Replace strata, PSUs and weights of a dataset with those of a design file.
pub fn apply_design(data: &RecallDataset, design: &SurveyDesign) -> Result<RecallDataset> {
    let by_id: HashMap<&str, &DesignUnit> = design.units().iter().map(|u| (u.person_id.as_str(), u)).collect();
    if by_id.len() != design.units().len() {
        return Err(Error::validation("design lists a person twice"));
    }
    let mut out = data.clone();
    for p in &mut out.persons {
        let u = by_id
            .get(p.id.as_str())
            .ok_or_else(|| Error::validation(format!("person {} is missing from the design", p.id)))?;
        p.stratum = u.stratum;
        p.psu = u.psu;
        p.weight = u.weight;
    }
    if design.units().len() != out.n_persons() {
        return Err(Error::validation("design lists persons that are not in the dataset"));
    }
    Ok(out)
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

pub fn write_params(path: &Path, params: &ModelParams) -> Result<()> {
    let mut text = serde_json::to_string_pretty(params)?;
    text.push('\n');
    write_text(path, &text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DrawsHeader {
    schema: String,
    draws: usize,
    acceptance: Vec<f64>,
    config: SamplerConfig,
}

/// Header line (config, acceptance) followed by one parameter set per line.
pub fn draws_to_jsonl(draws: &PosteriorDraws) -> Result<String> {
    let header = DrawsHeader {
        schema: DRAWS_SCHEMA.to_string(),
        draws: draws.draws.len(),
        acceptance: draws.acceptance.clone(),
        config: draws.config.clone(),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for d in &draws.draws {
        out.push_str(&serde_json::to_string(d)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    write_text(path, &draws_to_jsonl(draws)?)
}

pub fn read_draws(path: &Path) -> Result<Vec<ModelParams>> {
    let text = read_text(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| Error::validation(format!("{}: empty draws file", path.display())))?;
    let header: DrawsHeader =
        serde_json::from_str(first).map_err(|e| Error::validation(format!("{}: header: {e}", path.display())))?;
    if header.schema != DRAWS_SCHEMA {
        return Err(Error::validation(format!(
            "{}: unsupported schema `{}`, expected `{DRAWS_SCHEMA}`",
            path.display(),
            header.schema
        )));
    }
    let draws = lines
        .enumerate()
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| Error::validation(format!("{}: line {}: {e}", path.display(), k + 2)))
        })
        .collect::<Result<Vec<ModelParams>>>()?;
    if draws.len() != header.draws || draws.is_empty() {
        return Err(Error::validation(format!(
            "{}: header announces {} draws, found {}",
            path.display(),
            header.draws,
            draws.len()
        )));
    }
    Ok(draws)
}

pub fn diagnostics_to_csv(trace: &[TraceRow]) -> Result<String> {
    let header: Vec<String> = [
        "iteration",
        "log_density",
        "running_mean_log_density",
        "trace_sigma_u",
        "trace_sigma_eps",
        "beta_norm",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|t| {
            vec![
                t.iteration.to_string(),
                fmt_f64(t.log_density),
                fmt_f64(t.running_mean_log_density),
                fmt_f64(t.trace_sigma_u),
                fmt_f64(t.trace_sigma_eps),
                fmt_f64(t.beta_norm),
            ]
        })
        .collect();
    csv_to_string(DIAGNOSTICS_SCHEMA, &header, &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    /// Model-based usual-intake distribution.
    Usual,
    /// Single-recall distribution.
    Naive,
}

/// Output of `estimate` / `naive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateDoc {
    pub schema: String,
    pub kind: EstimateKind,
    /// Monte Carlo draws for usual intake; persons for the naive report.
    pub n: usize,
    pub seed: Option<u64>,
    pub weekend_share: Option<f64>,
    pub report: DistributionReport,
}

/// Output of `brr-se`: standard errors laid out like a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardErrorDoc {
    pub schema: String,
    pub kind: EstimateKind,
    pub fay: f64,
    pub n_strata: usize,
    pub n_replicates: usize,
    pub refit: bool,
    pub rows: Vec<ReportRow>,
    pub prob_at_or_below: f64,
}

impl StandardErrorDoc {
    /// Unflatten standard errors produced in [`DistributionReport::flatten`] order.
    pub fn from_flat(template: &DistributionReport, se: &[f64]) -> Result<Vec<ReportRow>> {
        let width = 1 + REPORT_PERCENTILES.len();
        if se.len() != template.rows.len() * width + 1 {
            return Err(Error::validation(
                "standard-error vector does not match the report layout",
            ));
        }
        Ok(template
            .rows
            .iter()
            .enumerate()
            .map(|(k, row)| ReportRow {
                label: row.label.clone(),
                mean: se[k * width],
                percentiles: se[k * width + 1..(k + 1) * width].to_vec(),
            })
            .collect())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_estimate(path: &Path) -> Result<EstimateDoc> {
    let doc: EstimateDoc = read_json(path)?;
    if doc.schema != ESTIMATE_SCHEMA {
        return Err(Error::validation(format!(
            "{}: expected schema `{ESTIMATE_SCHEMA}`",
            path.display()
        )));
    }
    Ok(doc)
}

pub fn read_standard_errors(path: &Path) -> Result<StandardErrorDoc> {
    let doc: StandardErrorDoc = read_json(path)?;
    if doc.schema != SE_SCHEMA {
        return Err(Error::validation(format!(
            "{}: expected schema `{SE_SCHEMA}`",
            path.display()
        )));
    }
    Ok(doc)
}

/// The final table: one row per component plus the total, two decimals,
/// `estimate (se)` cells when standard errors are supplied.
pub fn report_to_csv(report: &DistributionReport, se: Option<&[ReportRow]>) -> Result<String> {
    if let Some(se) = se {
        if se.len() != report.rows.len() || se.iter().zip(&report.rows).any(|(a, b)| a.label != b.label) {
            return Err(Error::validation("standard errors do not match the report rows"));
        }
    }
    let header: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let mut out = vec![row.label.clone()];
            let values = row.values();
            match se {
                Some(se) => out.extend(
                    values
                        .iter()
                        .zip(se[k].values())
                        .map(|(v, s)| format!("{v:.2} ({s:.2})")),
                ),
                None => out.extend(values.iter().map(|v| format!("{v:.2}"))),
            }
            out
        })
        .collect();
    csv_to_string(REPORT_SCHEMA, &header, &rows)
}

/// Metadata written next to the report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportMeta {
    pub schema: String,
    pub kind: EstimateKind,
    pub n: usize,
    pub seed: Option<u64>,
    pub weekend_share: Option<f64>,
    pub threshold: f64,
    pub prob_at_or_below: f64,
    pub prob_at_or_below_se: Option<f64>,
    pub fay: Option<f64>,
    pub n_replicates: Option<usize>,
    pub warnings: Vec<String>,
}

/// Read intakes for batch scoring: the twelve component keys and `energy`,
/// with an optional leading `id` column.
pub fn parse_intakes(text: &str) -> Result<(Vec<String>, Vec<IntakeVector>)> {
    let body = split_schema(text, INTAKE_SCHEMA, "intakes")?;
    let mut reader = csv_reader(body);
    let header = reader.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let has_id = names.first() == Some(&"id");
    let mut cols = Vec::with_capacity(N_COMPONENTS + 1);
    for key in HeiComponent::ALL
        .iter()
        .map(|c| c.key())
        .chain(std::iter::once("energy"))
    {
        cols.push(
            names
                .iter()
                .position(|&n| n == key)
                .ok_or_else(|| Error::validation(format!("intakes: missing column `{key}`")))?,
        );
    }
    let expected = N_COMPONENTS + 1 + usize::from(has_id);
    if names.len() != expected {
        return Err(Error::validation(format!(
            "intakes: expected {expected} columns, got {}",
            names.len()
        )));
    }
    let mut ids = Vec::new();
    let mut intakes = Vec::new();
    let mut errors = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() + 1);
        let parsed: std::result::Result<Vec<f64>, String> = cols
            .iter()
            .map(|&c| parse_f64(record.get(c).unwrap_or(""), line, names[c]))
            .collect();
        match parsed.and_then(|v| {
            let mut amounts = [0.0; N_COMPONENTS];
            amounts.copy_from_slice(&v[..N_COMPONENTS]);
            IntakeVector::new(amounts, v[N_COMPONENTS]).map_err(|e| format!("line {line}: {e}"))
        }) {
            Ok(intake) => {
                ids.push(if has_id {
                    record.get(0).unwrap_or("").to_string()
                } else {
                    (n + 1).to_string()
                });
                intakes.push(intake);
            }
            Err(e) => errors.push(e),
        }
    }
    collect_errors(errors, "intakes")?;
    Ok((ids, intakes))
}

pub fn scores_to_csv(ids: &[String], scores: &[ScoreProfile]) -> Result<String> {
    let mut header = vec!["id".to_string()];
    header.extend(HeiComponent::ALL.iter().map(|c| c.key().to_string()));
    header.push("total".to_string());
    let rows: Vec<Vec<String>> = ids
        .iter()
        .zip(scores)
        .map(|(id, s)| {
            let mut row = vec![id.clone()];
            row.extend(s.to_row().iter().map(|v| format!("{v:.2}")));
            row
        })
        .collect();
    csv_to_string(SCORES_SCHEMA, &header, &rows)
}

/// Write to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}
