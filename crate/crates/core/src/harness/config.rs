//! Run configuration: plain-text `key = value` files plus CLI overrides.
//!
//! Recognized keys (all optional; unknown keys are rejected):
//!   family        bernoulli | poisson | gaussian
//!   prior         unit-information | uniform | hyper-g | hyper-g-n |
//!                 beta-prime | zs-adapted | robust | intrinsic
//!   knots         even | vs | free
//!   max_knots     integer (default 30)
//!   varpi         real in (0,1) (default 0.1)
//!   linear_only   comma-separated covariate column names
//!   response      response column name for `fit` (default "y")
//!   chain_length  integer (default 10000)
//!   burn_in       integer (default 2000)
//!   thin          integer (default 4)
//!   grid_size     integer (default 101)
//!   seed          integer (default 17)
//!   chains        integer (default 1)
//!   replicates    integer (default 1)
//!   n             simulate sample size (default: family preset)
//!   sigma         Gaussian noise sd for simulate (default 1.0)
//!   budget        even-knot enumeration budget (default 100000)

use crate::knotmodel::{KnotStrategy, DEFAULT_MAX_KNOTS, DEFAULT_VARPI};
use crate::samplers::{ResponseModel, DEFAULT_ENUMERATION_BUDGET};
use crate::specfun::tcch::GPriorFamily;
use std::path::PathBuf;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub family: ResponseModel,
    pub prior: GPriorFamily,
    pub strategy: KnotStrategy,
    pub max_knots: usize,
    pub varpi: f64,
    pub linear_only: Vec<String>,
    pub response: String,
    pub chain_length: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub grid_size: usize,
    pub seed: u64,
    pub chains: usize,
    pub replicates: usize,
    pub n: Option<usize>,
    pub sigma: f64,
    pub budget: u128,
    pub out_dir: PathBuf,
    pub data: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: ResponseModel::Glm(crate::glmfit::Family::BernoulliLogit),
            prior: GPriorFamily::Intrinsic,
            strategy: KnotStrategy::VsKnot,
            max_knots: DEFAULT_MAX_KNOTS,
            varpi: DEFAULT_VARPI,
            linear_only: Vec::new(),
            response: "y".to_string(),
            chain_length: 10_000,
            burn_in: 2_000,
            thin: 4,
            grid_size: 101,
            seed: 17,
            chains: 1,
            replicates: 1,
            n: None,
            sigma: 1.0,
            budget: DEFAULT_ENUMERATION_BUDGET,
            out_dir: PathBuf::from("bsgam-out"),
            data: None,
        }
    }
}

impl RunConfig {
    /// Applies a single `key = value` setting.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "family" => {
                self.family = ResponseModel::parse(v)
                    .ok_or_else(|| format!("unknown family '{v}' (bernoulli|poisson|gaussian)"))?;
            }
            "prior" => {
                self.prior = GPriorFamily::parse(v).ok_or_else(|| {
                    format!(
                        "unknown prior '{v}' (unit-information|uniform|hyper-g|hyper-g-n|beta-prime|zs-adapted|robust|intrinsic)"
                    )
                })?;
            }
            "knots" => {
                self.strategy = KnotStrategy::parse(v)
                    .ok_or_else(|| format!("unknown knot strategy '{v}' (even|vs|free)"))?;
            }
            "max_knots" => self.max_knots = parse_num(key, v)?,
            "varpi" => {
                let w: f64 = parse_num(key, v)?;
                if !(w > 0.0 && w < 1.0) {
                    return Err(format!("varpi must be in (0,1), got {w}"));
                }
                self.varpi = w;
            }
            "linear_only" => {
                self.linear_only = v
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
            }
            "response" => self.response = v.to_string(),
            "chain_length" => self.chain_length = parse_num(key, v)?,
            "burn_in" => self.burn_in = parse_num(key, v)?,
            "thin" => self.thin = parse_num(key, v)?,
            "grid_size" => self.grid_size = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "chains" => self.chains = parse_num(key, v)?,
            "replicates" => self.replicates = parse_num(key, v)?,
            "n" => self.n = Some(parse_num(key, v)?),
            "sigma" => self.sigma = parse_num(key, v)?,
            "budget" => self.budget = parse_num(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "data" => self.data = Some(PathBuf::from(v)),
            other => return Err(format!("unknown configuration key '{other}'")),
        }
        Ok(())
    }

    /// Parses a whole config file body (`key = value` lines, `#` comments).
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected 'key = value'", lineno + 1));
            };
            self.apply(key, value)
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.chain_length <= self.burn_in {
            return Err(format!(
                "chain_length {} must exceed burn_in {}",
                self.chain_length, self.burn_in
            ));
        }
        if self.chains == 0 || self.thin == 0 || self.grid_size < 2 {
            return Err("chains and thin must be positive; grid_size at least 2".into());
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("could not parse value '{v}' for key '{key}'"))
}
