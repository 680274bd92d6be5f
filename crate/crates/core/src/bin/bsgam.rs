//! Command-line interface for Bayesian spline GAM estimation.

use bsgam::harness::{cmd_bf_table, cmd_ess_bench, cmd_fit, cmd_simulate, RunConfig};
use bsgam::specfun::tcch::GPriorFamily;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bsgam",
    version,
    about = "Bayesian model-selection estimation of generalized additive models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CommonArgs {
    /// Input CSV with a header row (fit only)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Plain-text key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Number of MCMC chains
    #[arg(long)]
    chains: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Response family: bernoulli | poisson | gaussian
    #[arg(long)]
    family: Option<String>,
    /// g-prior: unit-information | uniform | hyper-g | hyper-g-n |
    /// beta-prime | zs-adapted | robust | intrinsic
    #[arg(long)]
    prior: Option<String>,
    /// Knot strategy: even | vs | free
    #[arg(long)]
    knots: Option<String>,
    /// Response column name (fit)
    #[arg(long)]
    response: Option<String>,
    /// Comma-separated covariate names forced to linear effects
    #[arg(long)]
    linear_only: Option<String>,
    /// Maximum knots per covariate
    #[arg(long)]
    max_knots: Option<usize>,
    /// Truncated-geometric success probability on knot counts
    #[arg(long)]
    varpi: Option<f64>,
    /// Total chain length
    #[arg(long)]
    chain_length: Option<usize>,
    /// Burn-in iterations
    #[arg(long)]
    burn_in: Option<usize>,
    /// Thinning interval for retained draws
    #[arg(long)]
    thin: Option<usize>,
    /// Evaluation grid size per covariate
    #[arg(long)]
    grid_size: Option<usize>,
    /// Sample size for simulate / ess-bench
    #[arg(long)]
    n: Option<usize>,
    /// Number of simulate replicates
    #[arg(long)]
    replicates: Option<usize>,
    /// Gaussian noise standard deviation for simulate
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a CSV dataset and write posterior summaries
    Fit(CommonArgs),
    /// Run the synthetic-design replication study
    Simulate(CommonArgs),
    /// Emit the Bayes-factor table over model size and pseudo-R^2
    BfTable {
        #[command(flatten)]
        common: CommonArgs,
        /// Sample size entering the Bayes factors
        #[arg(long, default_value_t = 1000)]
        bf_n: usize,
    },
    /// Measure sampling efficiency (ESS per second) of the knot strategies
    EssBench(CommonArgs),
}

fn build_config(args: &CommonArgs) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("could not read config {}: {e}", path.display()))?;
        cfg.apply_text(&text)?;
    }
    if let Some(v) = &args.family {
        cfg.apply("family", v)?;
    }
    if let Some(v) = &args.prior {
        cfg.apply("prior", v)?;
    }
    if let Some(v) = &args.knots {
        cfg.apply("knots", v)?;
    }
    if let Some(v) = &args.response {
        cfg.apply("response", v)?;
    }
    if let Some(v) = &args.linear_only {
        cfg.apply("linear_only", v)?;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.chains {
        cfg.chains = v;
    }
    if let Some(v) = args.max_knots {
        cfg.max_knots = v;
    }
    if let Some(v) = args.varpi {
        cfg.apply("varpi", &v.to_string())?;
    }
    if let Some(v) = args.chain_length {
        cfg.chain_length = v;
    }
    if let Some(v) = args.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = args.thin {
        cfg.thin = v;
    }
    if let Some(v) = args.grid_size {
        cfg.grid_size = v;
    }
    if let Some(v) = args.n {
        cfg.n = Some(v);
    }
    if let Some(v) = args.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = args.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = &args.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = &args.out_dir {
        cfg.out_dir = v.clone();
    }
    Ok(cfg)
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Fit(args) => {
            let cfg = build_config(&args)?;
            let path = cmd_fit(&cfg).map_err(|e| e.to_string())?;
            println!("wrote {}", path.display());
        }
        Command::Simulate(args) => {
            let cfg = build_config(&args)?;
            let path = cmd_simulate(&cfg).map_err(|e| e.to_string())?;
            println!("wrote {}", path.display());
        }
        Command::BfTable { common, bf_n } => {
            let cfg = build_config(&common)?;
            let priors: Vec<GPriorFamily> = match &common.prior {
                Some(p) => vec![GPriorFamily::parse(p).ok_or(format!("unknown prior '{p}'"))?],
                None => {
                    let mut all = vec![GPriorFamily::UnitInformation];
                    all.extend(GPriorFamily::mixtures());
                    all
                }
            };
            let j_grid: Vec<usize> = (2..=50).collect();
            let r2_grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
            let path =
                cmd_bf_table(&cfg, &priors, bf_n, &j_grid, &r2_grid).map_err(|e| e.to_string())?;
            println!("wrote {}", path.display());
        }
        Command::EssBench(args) => {
            let cfg = build_config(&args)?;
            let path = cmd_ess_bench(&cfg).map_err(|e| e.to_string())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
