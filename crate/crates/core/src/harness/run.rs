//! Command orchestration: data loading, chain execution, and result
//! emission (JSON summary validated against the checked-in schema, CSV
//! traces and metric tables).

use super::config::RunConfig;
use super::metrics::{rmse_and_coverage, MetricsError, MetricsRow};
use super::synth::{generate_dataset, synth_f, SynthFamily};
use crate::knotmodel::{KnotModelError, KnotPriorConfig, KnotStrategy};
use crate::marginal::{bf_curve, MarginalError};
use crate::samplers::{
    enumerate_even, posterior_functional, run_chain, run_enumerated, ChainOptions, ChainRun,
    FunctionalSummary, ModelScorer, PosteriorDraws, SamplerError,
};
use crate::specfun::tcch::GPriorFamily;
use crate::splines::{build_basis, KnotState};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    KnotModel(#[from] KnotModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("summary JSON failed schema validation: {0}")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Data loading
// ---------------------------------------------------------------------------

pub struct LoadedData {
    pub design: Array2<f64>,
    pub y: Array1<f64>,
    pub covariate_names: Vec<String>,
}

/// Reads a headered CSV: the configured response column plus numeric
/// covariate columns.
pub fn load_csv(path: &Path, response: &str) -> Result<LoadedData, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(HarnessError::Csv)?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let y_idx = headers.iter().position(|h| h == response).ok_or_else(|| {
        HarnessError::Config(format!(
            "response column '{response}' not found; available: {}",
            headers.join(", ")
        ))
    })?;
    let covariate_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != y_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(covariate_names.len());
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                HarnessError::Config(format!(
                    "row {}, column '{}': could not parse '{}' as a number",
                    line + 2,
                    headers.get(i).map(String::as_str).unwrap_or("?"),
                    field
                ))
            })?;
            if i == y_idx {
                y.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::Config("data file has no rows".into()));
    }
    let p = covariate_names.len();
    let mut design = Array2::<f64>::zeros((rows.len(), p));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            design[[i, j]] = v;
        }
    }
    Ok(LoadedData {
        design,
        y: Array1::from_vec(y),
        covariate_names,
    })
}

/// Equispaced evaluation grid over each covariate's observed range.
pub fn grids_for(design: &Array2<f64>, grid_size: usize) -> Vec<Vec<f64>> {
    (0..design.ncols())
        .map(|j| {
            let col = design.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..grid_size)
                .map(|i| lo + (hi - lo) * i as f64 / (grid_size - 1) as f64)
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Summary document and schema validation
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct MoveSummary {
    pub r#move: String,
    pub proposed: u64,
    pub accepted: u64,
}

#[derive(Serialize)]
pub struct CovariateBlock {
    pub name: String,
    pub knot_count_posterior: Vec<f64>,
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Serialize)]
pub struct MetricsBlock {
    pub replicate: usize,
    pub covariate: usize,
    pub prior: String,
    pub rmse: f64,
    pub coverage_rate: f64,
    pub ess: f64,
}

#[derive(Serialize)]
pub struct SummaryDoc {
    pub version: String,
    pub command: String,
    pub family: String,
    pub prior: String,
    pub knot_strategy: String,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub chains: usize,
    pub chain_length: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub draws: usize,
    pub ess: f64,
    pub runtime_seconds: f64,
    pub fit_failures: u64,
    pub acceptance: Vec<MoveSummary>,
    pub covariates: Vec<CovariateBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<MetricsBlock>>,
}

const SUMMARY_SCHEMA: &str = include_str!("../../schema/summary.schema.json");

/// Minimal structural validator covering the subset of JSON Schema the
/// summary schema uses: `type`, `required`, `properties`, `items`.
pub fn validate_against_schema(value: &Value, schema: &Value) -> Result<(), String> {
    if let Some(ty) = schema.get("type").and_then(Value::as_str) {
        let ok = match ty {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            other => return Err(format!("unsupported schema type '{other}'")),
        };
        if !ok {
            return Err(format!("expected {ty}, found {value}"));
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for name in required {
            let name = name.as_str().unwrap_or_default();
            if value.get(name).is_none() {
                return Err(format!("missing required property '{name}'"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        for (name, sub) in props {
            if let Some(v) = value.get(name) {
                validate_against_schema(v, sub).map_err(|e| format!("{name}: {e}"))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            validate_against_schema(v, items).map_err(|e| format!("[{i}]: {e}"))?;
        }
    }
    Ok(())
}

/// Validates a summary document against the checked-in schema.
pub fn validate_summary(value: &Value) -> Result<(), HarnessError> {
    let schema: Value = serde_json::from_str(SUMMARY_SCHEMA)?;
    validate_against_schema(value, &schema).map_err(HarnessError::Schema)
}

fn write_summary(path: &Path, doc: &SummaryDoc) -> Result<(), HarnessError> {
    let value = serde_json::to_value(doc)?;
    validate_summary(&value)?;
    std::fs::write(path, serde_json::to_string_pretty(&value)? + "\n").map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// Shared chain execution
// ---------------------------------------------------------------------------

struct RunOutcome {
    draws: PosteriorDraws,
    moves: Vec<MoveSummary>,
    ess: f64,
    runtime_seconds: f64,
    fit_failures: u64,
}

fn merge_runs(runs: Vec<ChainRun>) -> RunOutcome {
    let mut iter = runs.into_iter();
    let first = iter.next().expect("at least one chain");
    let mut draws = first.draws;
    let mut ess = first.ess;
    let mut runtime = first.runtime_seconds;
    let fit_failures = first.fit_failures;
    let mut move_map: Vec<(String, u64, u64)> = first
        .moves
        .stats
        .iter()
        .map(|(k, p, a)| (k.name().to_string(), *p, *a))
        .collect();
    for run in iter {
        ess += run.ess;
        runtime += run.runtime_seconds;
        for (k, p, a) in run.moves.stats {
            if let Some(e) = move_map.iter_mut().find(|e| e.0 == k.name()) {
                e.1 += p;
                e.2 += a;
            } else {
                move_map.push((k.name().to_string(), p, a));
            }
        }
        draws.merge(run.draws);
    }
    RunOutcome {
        draws,
        moves: move_map
            .into_iter()
            .map(|(m, p, a)| MoveSummary {
                r#move: m,
                proposed: p,
                accepted: a,
            })
            .collect(),
        ess,
        runtime_seconds: runtime,
        fit_failures,
    }
}

fn chain_seed(base: u64, chain: usize) -> u64 {
    base.wrapping_add((chain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs the configured sampler on the given data. Even-knot models are
/// enumerated exactly when the model space fits the budget; otherwise (and
/// for the other strategies) MCMC chains are run, in parallel when
/// `cfg.chains > 1`.
fn execute(
    cfg: &RunConfig,
    design: Array2<f64>,
    y: Array1<f64>,
    linear_flags: &[bool],
) -> Result<(RunOutcome, ModelScorer), HarnessError> {
    let knot_cfg = KnotPriorConfig::from_design(
        &design,
        cfg.strategy,
        cfg.max_knots,
        cfg.varpi,
        linear_flags,
    )?;
    let grids = grids_for(&design, cfg.grid_size);
    let scorer = ModelScorer::new(
        design,
        y,
        cfg.family.clone(),
        cfg.prior.clone(),
        knot_cfg,
        Some(crate::samplers::DEFAULT_CACHE_CAPACITY),
    )?;
    let retained_per_chain = (cfg.chain_length - cfg.burn_in).div_ceil(cfg.thin.max(1));
    if cfg.strategy == KnotStrategy::EvenKnot {
        match enumerate_even(&scorer, cfg.budget) {
            Ok(posterior) => {
                let opts = ChainOptions {
                    seed: cfg.seed,
                    grids,
                    ..Default::default()
                };
                let run =
                    run_enumerated(&scorer, &posterior, retained_per_chain * cfg.chains, &opts)?;
                return Ok((merge_runs(vec![run]), scorer));
            }
            Err(SamplerError::EnumerationBudget { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let runs: Result<Vec<ChainRun>, SamplerError> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let opts = ChainOptions {
                length: cfg.chain_length,
                burn_in: cfg.burn_in,
                thin: cfg.thin,
                seed: chain_seed(cfg.seed, c),
                grids: grids.clone(),
            };
            run_chain(&scorer, &opts)
        })
        .collect();
    Ok((merge_runs(runs?), scorer))
}

fn covariate_blocks(
    draws: &PosteriorDraws,
    summary: &FunctionalSummary,
    names: &[String],
    max_knots: usize,
) -> Vec<CovariateBlock> {
    let hist = draws.knot_count_posterior(max_knots);
    summary
        .per_covariate
        .iter()
        .enumerate()
        .map(|(j, cov)| CovariateBlock {
            name: names.get(j).cloned().unwrap_or_else(|| format!("x{j}")),
            knot_count_posterior: hist[j].clone(),
            grid: cov.grid.clone(),
            mean: cov.mean.clone(),
            lower: cov.lower.clone(),
            upper: cov.upper.clone(),
        })
        .collect()
}

fn write_trace_csv(path: &Path, draws: &PosteriorDraws) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    let p = draws.counts.first().map(Vec::len).unwrap_or(0);
    let mut header = vec!["draw".to_string(), "g".to_string(), "alpha".to_string()];
    if !draws.phi.is_empty() {
        header.push("phi".to_string());
    }
    header.push("log_marginal".to_string());
    for j in 0..p {
        header.push(format!("knots_x{j}"));
    }
    w.write_record(&header)?;
    for d in 0..draws.g.len() {
        let mut rec = vec![
            d.to_string(),
            format!("{:.17e}", draws.g[d]),
            format!("{:.17e}", draws.alpha[d]),
        ];
        if !draws.phi.is_empty() {
            rec.push(format!("{:.17e}", draws.phi[d]));
        }
        rec.push(format!("{:.17e}", draws.log_marginal[d]));
        for j in 0..p {
            rec.push(draws.counts[d][j].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

fn write_functional_csv(
    path: &Path,
    summary: &FunctionalSummary,
    names: &[String],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["covariate", "name", "x", "mean", "lower", "upper"])?;
    for (j, cov) in summary.per_covariate.iter().enumerate() {
        let name = names.get(j).cloned().unwrap_or_else(|| format!("x{j}"));
        for i in 0..cov.grid.len() {
            w.write_record(&[
                j.to_string(),
                name.clone(),
                format!("{:.17e}", cov.grid[i]),
                format!("{:.17e}", cov.mean[i]),
                format!("{:.17e}", cov.lower[i]),
                format!("{:.17e}", cov.upper[i]),
            ])?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// In-memory result of a `fit` run.
pub struct FitResult {
    pub summary: SummaryDoc,
    pub functional: FunctionalSummary,
    pub draws: PosteriorDraws,
    pub covariate_names: Vec<String>,
}

/// Fits the dataset named in the configuration and returns the artifacts
/// without touching the filesystem.
pub fn run_fit(cfg: &RunConfig) -> Result<FitResult, HarnessError> {
    cfg.validate().map_err(HarnessError::Config)?;
    let data_path = cfg
        .data
        .as_ref()
        .ok_or_else(|| HarnessError::Config("fit requires --data <csv>".into()))?;
    let data = load_csv(data_path, &cfg.response)?;
    let linear_flags: Vec<bool> = data
        .covariate_names
        .iter()
        .map(|n| cfg.linear_only.iter().any(|l| l == n))
        .collect();
    for l in &cfg.linear_only {
        if !data.covariate_names.iter().any(|n| n == l) {
            return Err(HarnessError::Config(format!(
                "linear_only column '{l}' is not a covariate"
            )));
        }
    }
    let n = data.design.nrows();
    let p = data.design.ncols();
    let (outcome, _scorer) = execute(cfg, data.design, data.y, &linear_flags)?;
    let functional = posterior_functional(&outcome.draws);
    let summary = SummaryDoc {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "fit".into(),
        family: cfg.family.name().into(),
        prior: cfg.prior.name().into(),
        knot_strategy: cfg.strategy.name().into(),
        n,
        p,
        seed: cfg.seed,
        chains: cfg.chains,
        chain_length: cfg.chain_length,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        draws: outcome.draws.g.len(),
        ess: outcome.ess,
        runtime_seconds: outcome.runtime_seconds,
        fit_failures: outcome.fit_failures,
        acceptance: outcome.moves,
        covariates: covariate_blocks(
            &outcome.draws,
            &functional,
            &data.covariate_names,
            cfg.max_knots,
        ),
        metrics: None,
    };
    Ok(FitResult {
        summary,
        functional,
        draws: outcome.draws,
        covariate_names: data.covariate_names,
    })
}

/// `fit`: model a CSV dataset and write summary, trace, and functional files.
pub fn cmd_fit(cfg: &RunConfig) -> Result<PathBuf, HarnessError> {
    let result = run_fit(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let summary_path = cfg.out_dir.join("summary.json");
    write_summary(&summary_path, &result.summary)?;
    write_trace_csv(&cfg.out_dir.join("trace.csv"), &result.draws)?;
    write_functional_csv(
        &cfg.out_dir.join("functional.csv"),
        &result.functional,
        &result.covariate_names,
    )?;
    Ok(summary_path)
}

/// Centered truth on the evaluation grids: the synthetic component minus its
/// design-point average (the identifiability constraint the fit imposes).
pub fn centered_truth(design: &Array2<f64>, grids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..design.ncols())
        .map(|j| {
            let offset: f64 = design
                .column(j)
                .iter()
                .map(|&x| synth_f(j + 1, x))
                .sum::<f64>()
                / design.nrows() as f64;
            grids[j]
                .iter()
                .map(|&x| synth_f(j + 1, x) - offset)
                .collect()
        })
        .collect()
}

/// One simulate replicate: generate data, run the sampler, score the fit.
pub fn simulate_replicate(
    cfg: &RunConfig,
    family: SynthFamily,
    n: usize,
    replicate: usize,
) -> Result<Vec<MetricsRow>, HarnessError> {
    let seed = cfg
        .seed
        .wrapping_add((replicate as u64).wrapping_mul(7_368_787));
    let (design, y) = generate_dataset(n, family, seed);
    let grids = grids_for(&design, cfg.grid_size);
    let truth = centered_truth(&design, &grids);
    let mut rep_cfg = cfg.clone();
    rep_cfg.seed = seed ^ 0x5DEECE66D;
    rep_cfg.chains = 1;
    let (outcome, _) = execute(&rep_cfg, design, y, &[])?;
    let functional = posterior_functional(&outcome.draws);
    Ok(rmse_and_coverage(
        &functional,
        &truth,
        replicate,
        cfg.prior.name(),
        outcome.ess,
        outcome.runtime_seconds,
    )?)
}

/// `simulate`: replicate the synthetic-design study for the configured
/// family/prior/knot strategy and emit metric tables.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf, HarnessError> {
    cfg.validate().map_err(HarnessError::Config)?;
    let ResponseModelFamily { family, n } = synth_family_of(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let start = Instant::now();
    let rows: Result<Vec<Vec<MetricsRow>>, HarnessError> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| simulate_replicate(cfg, family, n, r))
        .collect();
    let rows: Vec<MetricsRow> = rows?.into_iter().flatten().collect();
    // metrics.csv stays free of wall-clock fields so identical seeds produce
    // identical bytes
    let metrics_path = cfg.out_dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&metrics_path)?;
    w.write_record([
        "replicate",
        "covariate",
        "prior",
        "rmse",
        "coverage_rate",
        "ess",
    ])?;
    for row in &rows {
        w.write_record(&[
            row.replicate.to_string(),
            row.covariate.to_string(),
            row.prior.clone(),
            format!("{:.17e}", row.rmse),
            format!("{:.17e}", row.coverage_rate()),
            format!("{:.6e}", row.ess),
        ])?;
    }
    w.flush().map_err(|e| io_err(&metrics_path, e))?;
    let coverage_path = cfg.out_dir.join("coverage.csv");
    let mut w = csv::Writer::from_path(&coverage_path)?;
    w.write_record(["replicate", "covariate", "grid_index", "covered"])?;
    for row in &rows {
        for (gi, c) in row.coverage.iter().enumerate() {
            w.write_record(&[
                row.replicate.to_string(),
                row.covariate.to_string(),
                gi.to_string(),
                c.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| io_err(&coverage_path, e))?;
    let doc = SummaryDoc {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "simulate".into(),
        family: cfg.family.name().into(),
        prior: cfg.prior.name().into(),
        knot_strategy: cfg.strategy.name().into(),
        n,
        p: 3,
        seed: cfg.seed,
        chains: cfg.chains,
        chain_length: cfg.chain_length,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        draws: 0,
        ess: rows.iter().map(|r| r.ess).sum::<f64>() / rows.len().max(1) as f64,
        runtime_seconds: start.elapsed().as_secs_f64(),
        fit_failures: 0,
        acceptance: Vec::new(),
        covariates: Vec::new(),
        metrics: Some(
            rows.iter()
                .map(|r| MetricsBlock {
                    replicate: r.replicate,
                    covariate: r.covariate,
                    prior: r.prior.clone(),
                    rmse: r.rmse,
                    coverage_rate: r.coverage_rate(),
                    ess: r.ess,
                })
                .collect(),
        ),
    };
    let summary_path = cfg.out_dir.join("summary.json");
    write_summary(&summary_path, &doc)?;
    Ok(summary_path)
}

struct ResponseModelFamily {
    family: SynthFamily,
    n: usize,
}

fn synth_family_of(cfg: &RunConfig) -> Result<ResponseModelFamily, HarnessError> {
    let family = SynthFamily::parse(cfg.family.name(), cfg.sigma)
        .ok_or_else(|| HarnessError::Config("unsupported family for simulate".into()))?;
    Ok(ResponseModelFamily {
        family,
        n: cfg.n.unwrap_or_else(|| family.default_n()),
    })
}

/// `bf-table`: Bayes-factor table for one redundant knot across model sizes
/// and goodness-of-fit levels, one CSV row per (prior, n, J, R^2).
pub fn cmd_bf_table(
    cfg: &RunConfig,
    priors: &[GPriorFamily],
    n: usize,
    j_grid: &[usize],
    r2_grid: &[f64],
) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let path = cfg.out_dir.join("bf_table.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["prior", "n", "J", "r2", "log_bf"])?;
    for prior in priors {
        for row in bf_curve(prior, n, j_grid, r2_grid)? {
            w.write_record(&[
                row.prior,
                row.n.to_string(),
                row.j.to_string(),
                format!("{:.6}", row.r2),
                format!("{:.12e}", row.log_bf),
            ])?;
        }
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// `ess-bench`: sampling efficiency (ESS per second) of the three knot
/// strategies on one synthetic dataset, plus incremental-vs-rebuild basis
/// edit timings.
pub fn cmd_ess_bench(cfg: &RunConfig) -> Result<PathBuf, HarnessError> {
    let ResponseModelFamily { family, n } = synth_family_of(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let (design, y) = generate_dataset(n, family, cfg.seed);
    let path = cfg.out_dir.join("ess_bench.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["strategy", "ess", "seconds", "ess_per_second"])?;
    for strategy in [
        KnotStrategy::EvenKnot,
        KnotStrategy::VsKnot,
        KnotStrategy::FreeKnot,
    ] {
        let knot_cfg =
            KnotPriorConfig::from_design(&design, strategy, cfg.max_knots, cfg.varpi, &[])?;
        let scorer = ModelScorer::new(
            design.clone(),
            y.clone(),
            cfg.family.clone(),
            cfg.prior.clone(),
            knot_cfg,
            Some(crate::samplers::DEFAULT_CACHE_CAPACITY),
        )?;
        let opts = ChainOptions {
            length: 1200,
            burn_in: 200,
            thin: 4,
            seed: cfg.seed,
            grids: Vec::new(),
        };
        let run = run_chain(&scorer, &opts)?;
        w.write_record(&[
            strategy.name().to_string(),
            format!("{:.3}", run.ess),
            format!("{:.4}", run.runtime_seconds),
            format!("{:.3}", run.ess / run.runtime_seconds.max(1e-9)),
        ])?;
    }
    // incremental edits against full rebuilds at a multi-knot configuration
    let knot_cfg =
        KnotPriorConfig::from_design(&design, KnotStrategy::VsKnot, cfg.max_knots, cfg.varpi, &[])?;
    let mut knots = KnotState::from_design(&design).unwrap();
    let cands = &knot_cfg.covariates[0].candidates;
    if cands.len() < 2 {
        return Err(HarnessError::Config(
            "ess-bench needs at least two knot candidates".into(),
        ));
    }
    knots
        .set_interior(
            0,
            cands
                .iter()
                .copied()
                .take(10.min(cands.len() - 1))
                .collect(),
        )
        .unwrap();
    let design_arc = Arc::new(design);
    let basis = build_basis(Arc::clone(&design_arc), &knots).unwrap();
    // a knot strictly between the last two candidates never collides
    let extra = 0.5 * (cands[cands.len() - 2] + cands[cands.len() - 1]);
    let t0 = Instant::now();
    for _ in 0..500 {
        let b2 = basis.insert_knot(0, extra).unwrap();
        let _ = b2.remove_knot(0, extra).unwrap();
    }
    let incremental = t0.elapsed().as_secs_f64();
    let (with_extra, _) = knots.insert(0, extra).unwrap();
    let t1 = Instant::now();
    for _ in 0..500 {
        let _ = build_basis(Arc::clone(&design_arc), &with_extra).unwrap();
        let _ = build_basis(Arc::clone(&design_arc), &knots).unwrap();
    }
    let rebuild = t1.elapsed().as_secs_f64();
    w.write_record(&[
        "basis-edit".to_string(),
        format!("incremental={incremental:.4}s"),
        format!("rebuild={rebuild:.4}s"),
        format!("{:.2}", rebuild / incremental.max(1e-12)),
    ])?;
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}
