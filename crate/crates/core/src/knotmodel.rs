//! Priors over knot configurations: even-knot (quantile rule), VS-knot
//! (subset selection from a candidate grid), and free-knot (continuous
//! locations), all sharing a truncated-geometric prior on the knot counts.
//!
//! Log priors are unnormalized. Out-of-support states return `-inf` rather
//! than an error so samplers can fold support checks into acceptance ratios.
//! The full-column-rank indicator is enforced at fit time (a rank-deficient
//! candidate model is treated as prior-probability zero by the samplers).

use crate::splines::{quantile_knots, unique_sorted, KnotState, SplineError};
use ndarray::Array2;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KnotModelError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("varpi must be in (0, 1), got {0}")]
    BadVarpi(f64),
    #[error("linear_only list has {got} entries for {expected} covariates")]
    LinearOnlyLength { got: usize, expected: usize },
    #[error("count {count} exceeds max_knots {max} for covariate {covariate}")]
    CountOutOfRange {
        covariate: usize,
        count: usize,
        max: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KnotStrategy {
    EvenKnot,
    VsKnot,
    FreeKnot,
}

impl KnotStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            KnotStrategy::EvenKnot => "even",
            KnotStrategy::VsKnot => "vs",
            KnotStrategy::FreeKnot => "free",
        }
    }

    pub fn parse(s: &str) -> Option<KnotStrategy> {
        match s.trim().to_ascii_lowercase().as_str() {
            "even" | "even-knot" | "even_knot" | "ek" => Some(KnotStrategy::EvenKnot),
            "vs" | "vs-knot" | "vs_knot" => Some(KnotStrategy::VsKnot),
            "free" | "free-knot" | "free_knot" | "fk" => Some(KnotStrategy::FreeKnot),
            _ => None,
        }
    }
}

/// Per-covariate knot configuration: count cap, candidate grid, and the
/// quantile rule table for even-knot states.
#[derive(Clone, Debug)]
pub struct CovariateKnotConfig {
    pub max_knots: usize,
    pub linear_only: bool,
    pub boundary_low: f64,
    pub boundary_high: f64,
    /// VS candidate knots (defaults to `max_knots` quantile knots).
    pub candidates: Vec<f64>,
    /// `quantile_sets[u]` holds the even-knot locations for count `u`.
    pub quantile_sets: Vec<Vec<f64>>,
}

/// Knot-prior configuration shared by all three strategies.
#[derive(Clone, Debug)]
pub struct KnotPriorConfig {
    pub strategy: KnotStrategy,
    pub varpi: f64,
    pub covariates: Vec<CovariateKnotConfig>,
    /// Boundary/linear-only template with empty interiors.
    pub base_knots: KnotState,
}

pub const DEFAULT_VARPI: f64 = 0.1;
pub const DEFAULT_MAX_KNOTS: usize = 30;

impl KnotPriorConfig {
    /// Builds the configuration from a design matrix: boundaries at the
    /// observed min/max, candidate grids and quantile tables over the unique
    /// values of each column. `max_knots` is capped so the quantile rule
    /// always has enough unique design values.
    pub fn from_design(
        design: &Array2<f64>,
        strategy: KnotStrategy,
        max_knots: usize,
        varpi: f64,
        linear_only: &[bool],
    ) -> Result<Self, KnotModelError> {
        if !(varpi > 0.0 && varpi < 1.0) {
            return Err(KnotModelError::BadVarpi(varpi));
        }
        let p = design.ncols();
        if !linear_only.is_empty() && linear_only.len() != p {
            return Err(KnotModelError::LinearOnlyLength {
                got: linear_only.len(),
                expected: p,
            });
        }
        let mut base_knots = KnotState::from_design(design)?;
        let mut covariates = Vec::with_capacity(p);
        for j in 0..p {
            let lin = linear_only.get(j).copied().unwrap_or(false);
            base_knots.set_linear_only(j, lin)?;
            let uniq = unique_sorted(design.column(j));
            let cap = if lin {
                0
            } else {
                max_knots.min(uniq.len().saturating_sub(2))
            };
            let candidates = quantile_knots(&uniq, cap)?;
            let mut quantile_sets = Vec::with_capacity(cap + 1);
            for u in 0..=cap {
                quantile_sets.push(quantile_knots(&uniq, u)?);
            }
            let c = base_knots.covariate(j);
            covariates.push(CovariateKnotConfig {
                max_knots: cap,
                linear_only: lin,
                boundary_low: c.boundary_low,
                boundary_high: c.boundary_high,
                candidates,
                quantile_sets,
            });
        }
        Ok(KnotPriorConfig {
            strategy,
            varpi,
            covariates,
            base_knots,
        })
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    /// The even-knot state for a vector of per-covariate counts.
    pub fn even_state(&self, counts: &[usize]) -> Result<KnotState, KnotModelError> {
        let mut state = self.base_knots.clone();
        for (j, (&u, cov)) in counts.iter().zip(self.covariates.iter()).enumerate() {
            if u > cov.max_knots {
                return Err(KnotModelError::CountOutOfRange {
                    covariate: j,
                    count: u,
                    max: cov.max_knots,
                });
            }
            state.set_interior(j, cov.quantile_sets[u].clone())?;
        }
        Ok(state)
    }

    /// Candidate grids per covariate (for cache keys and VS moves).
    pub fn candidate_grids(&self) -> Vec<Vec<f64>> {
        self.covariates
            .iter()
            .map(|c| c.candidates.clone())
            .collect()
    }
}

/// Unnormalized log prior on the knot count of one covariate:
/// `u log(1-varpi) + log(varpi)` truncated at `max_knots`; linear-only
/// covariates carry a point mass at zero. As `varpi` approaches zero the
/// truncated geometric approaches the hierarchical discrete uniform while
/// keeping its geometric tail.
pub fn log_q_count(u: usize, cov: &CovariateKnotConfig, varpi: f64) -> f64 {
    if cov.linear_only {
        return if u == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if u > cov.max_knots {
        return f64::NEG_INFINITY;
    }
    u as f64 * (1.0 - varpi).ln() + varpi.ln()
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Even-knot prior: the count prior when every covariate's knots equal the
/// quantile rule for their count; `-inf` otherwise.
pub fn log_prior_even(knots: &KnotState, cfg: &KnotPriorConfig) -> f64 {
    let mut total = 0.0;
    for (j, cov) in cfg.covariates.iter().enumerate() {
        let interior = &knots.covariate(j).interior;
        let u = interior.len();
        if u > cov.max_knots || interior[..] != cov.quantile_sets[u][..] {
            return f64::NEG_INFINITY;
        }
        total += log_q_count(u, cov, cfg.varpi);
    }
    total
}

/// VS-knot prior: count prior divided by the number of equally weighted
/// candidate subsets of that size; `-inf` when a knot is off the grid.
pub fn log_prior_vs(knots: &KnotState, cfg: &KnotPriorConfig) -> f64 {
    let mut total = 0.0;
    for (j, cov) in cfg.covariates.iter().enumerate() {
        let interior = &knots.covariate(j).interior;
        let u = interior.len();
        if u > cov.max_knots {
            return f64::NEG_INFINITY;
        }
        for t in interior {
            if !cov.candidates.iter().any(|c| c == t) {
                return f64::NEG_INFINITY;
            }
        }
        total += log_q_count(u, cov, cfg.varpi) - ln_choose(cov.candidates.len(), u);
    }
    total
}

/// Free-knot prior: count prior times the ordered-uniform density
/// `|xi|! / (range)^|xi|` on the sorted knot locations.
pub fn log_prior_free(knots: &KnotState, cfg: &KnotPriorConfig) -> f64 {
    let mut total = 0.0;
    for (j, cov) in cfg.covariates.iter().enumerate() {
        let c = knots.covariate(j);
        let u = c.interior.len();
        if u > cov.max_knots {
            return f64::NEG_INFINITY;
        }
        let mut prev = cov.boundary_low;
        for &t in &c.interior {
            if !(t > prev && t < cov.boundary_high) {
                return f64::NEG_INFINITY;
            }
            prev = t;
        }
        let range = cov.boundary_high - cov.boundary_low;
        total += log_q_count(u, cov, cfg.varpi) + ln_gamma(u as f64 + 1.0) - u as f64 * range.ln();
    }
    total
}

/// Dispatches on the configured strategy.
pub fn log_prior(knots: &KnotState, cfg: &KnotPriorConfig) -> f64 {
    match cfg.strategy {
        KnotStrategy::EvenKnot => log_prior_even(knots, cfg),
        KnotStrategy::VsKnot => log_prior_vs(knots, cfg),
        KnotStrategy::FreeKnot => log_prior_free(knots, cfg),
    }
}

/// Properness restriction of the beta-prime g-prior, folded into the knot
/// prior when that prior is selected.
pub fn beta_prime_admissible(j_total: usize, n: usize) -> bool {
    (j_total as f64) < n as f64 - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn grid_design(n: usize, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, p), |(i, j)| {
            // deterministic scattered values in (-1, 1), distinct per column
            let v = ((i * 37 + j * 11 + 5) % (n + 3)) as f64 / (n + 3) as f64;
            2.0 * v - 1.0 + 0.001 * j as f64
        })
    }

    fn cfg_for(
        n: usize,
        p: usize,
        strategy: KnotStrategy,
        m: usize,
        linear: &[bool],
    ) -> (Array2<f64>, KnotPriorConfig) {
        let d = grid_design(n, p);
        let cfg = KnotPriorConfig::from_design(&d, strategy, m, DEFAULT_VARPI, linear).unwrap();
        (d, cfg)
    }

    #[test]
    fn count_prior_examples() {
        let (_, cfg) = cfg_for(100, 1, KnotStrategy::EvenKnot, 30, &[]);
        let cov = &cfg.covariates[0];
        assert_abs_diff_eq!(log_q_count(0, cov, 0.1), 0.1f64.ln(), epsilon = 1e-15);
        let ratio = log_q_count(5, cov, 0.1) - log_q_count(4, cov, 0.1);
        assert_abs_diff_eq!(ratio.exp(), 0.9, epsilon = 1e-14);
        assert_eq!(log_q_count(31, cov, 0.1), f64::NEG_INFINITY);
        // normalizing by direct summation over {0..30}
        let z: f64 = (0..=30).map(|u| log_q_count(u, cov, 0.1).exp()).sum();
        assert_abs_diff_eq!(z, 1.0 - 0.9f64.powi(31), epsilon = 1e-12);
        let total: f64 = (0..=30).map(|u| log_q_count(u, cov, 0.1).exp() / z).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_only_is_point_mass_at_zero() {
        let (_, cfg) = cfg_for(50, 1, KnotStrategy::EvenKnot, 10, &[true]);
        let cov = &cfg.covariates[0];
        assert_eq!(log_q_count(0, cov, 0.1), 0.0);
        assert_eq!(log_q_count(1, cov, 0.1), f64::NEG_INFINITY);
    }

    #[test]
    fn even_prior_follows_quantile_rule() {
        let (_, cfg) = cfg_for(120, 3, KnotStrategy::EvenKnot, 10, &[]);
        let empty = cfg.even_state(&[0, 0, 0]).unwrap();
        assert_abs_diff_eq!(
            log_prior_even(&empty, &cfg),
            3.0 * 0.1f64.ln(),
            epsilon = 1e-14
        );
        let state = cfg.even_state(&[2, 0, 1]).unwrap();
        let expect: f64 = [2usize, 0, 1]
            .iter()
            .zip(cfg.covariates.iter())
            .map(|(&u, cov)| log_q_count(u, cov, cfg.varpi))
            .sum();
        assert_abs_diff_eq!(log_prior_even(&state, &cfg), expect, epsilon = 1e-14);
        // off-grid knots are out of support
        let mut off = empty.clone();
        off.set_interior(0, vec![0.0123456]).unwrap();
        assert_eq!(log_prior_even(&off, &cfg), f64::NEG_INFINITY);
    }

    #[test]
    fn vs_prior_counts_subsets() {
        let (_, cfg) = cfg_for(200, 1, KnotStrategy::VsKnot, 30, &[]);
        let cov = &cfg.covariates[0];
        assert_eq!(cov.candidates.len(), 30);
        let mut state = cfg.base_knots.clone();
        state
            .set_interior(0, vec![cov.candidates[3], cov.candidates[17]])
            .unwrap();
        let expect = log_q_count(2, cov, cfg.varpi) - 435.0f64.ln();
        assert_abs_diff_eq!(log_prior_vs(&state, &cfg), expect, epsilon = 1e-12);
        let mut off = cfg.base_knots.clone();
        off.set_interior(0, vec![0.5 * (cov.candidates[0] + cov.candidates[1])])
            .unwrap();
        assert_eq!(log_prior_vs(&off, &cfg), f64::NEG_INFINITY);
        let empty = cfg.base_knots.clone();
        assert_abs_diff_eq!(log_prior_vs(&empty, &cfg), 0.1f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn free_prior_ordered_uniform_density() {
        // covariate range (0, 1): single knot density is 1
        let mut d = Array2::zeros((11, 1));
        for i in 0..11 {
            d[[i, 0]] = i as f64 / 10.0;
        }
        let cfg = KnotPriorConfig::from_design(&d, KnotStrategy::FreeKnot, 5, 0.1, &[]).unwrap();
        let empty = cfg.base_knots.clone();
        assert_abs_diff_eq!(log_prior_free(&empty, &cfg), 0.1f64.ln(), epsilon = 1e-14);
        let mut one = empty.clone();
        one.set_interior(0, vec![0.314]).unwrap();
        let q1 = log_q_count(1, &cfg.covariates[0], 0.1);
        assert_abs_diff_eq!(log_prior_free(&one, &cfg), q1, epsilon = 1e-14);

        // covariate range (0, 2): two knots give density 2!/2^2 = 1/2
        let mut d2 = Array2::zeros((11, 1));
        for i in 0..11 {
            d2[[i, 0]] = 2.0 * i as f64 / 10.0;
        }
        let cfg2 = KnotPriorConfig::from_design(&d2, KnotStrategy::FreeKnot, 5, 0.1, &[]).unwrap();
        let mut two = cfg2.base_knots.clone();
        two.set_interior(0, vec![0.7, 1.3]).unwrap();
        let q2 = log_q_count(2, &cfg2.covariates[0], 0.1);
        assert_abs_diff_eq!(
            log_prior_free(&two, &cfg2),
            q2 - 2.0f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn support_nesting() {
        // even-knot state whose quantile knots land on the candidate grid is
        // inside the VS support, and both are inside the free-knot support
        let (_, cfg) = cfg_for(101, 1, KnotStrategy::EvenKnot, 3, &[]);
        let state = cfg.even_state(&[1]).unwrap();
        // count 1 puts the knot at the median = candidate Q(2/4)
        assert!(log_prior_even(&state, &cfg).is_finite());
        assert!(log_prior_vs(&state, &cfg).is_finite());
        assert!(log_prior_free(&state, &cfg).is_finite());
    }

    #[test]
    fn priors_exchangeable_across_covariates() {
        let (_, cfg) = cfg_for(90, 2, KnotStrategy::EvenKnot, 8, &[]);
        let a = cfg.even_state(&[3, 1]).unwrap();
        let b = cfg.even_state(&[1, 3]).unwrap();
        // identical per-covariate configs up to boundary shifts: counts are
        // what the prior sees, so swapped counts give the same value
        assert_abs_diff_eq!(
            log_prior_even(&a, &cfg),
            log_prior_even(&b, &cfg),
            epsilon = 1e-13
        );
    }

    #[test]
    fn vs_normalization_brute_force() {
        // p=1, M=3: summing exp(log_prior_vs) over all 8 subsets gives
        // sum_u q(u), the same normalizer as the count prior alone
        let (_, cfg) = cfg_for(101, 1, KnotStrategy::VsKnot, 3, &[]);
        let cands = cfg.covariates[0].candidates.clone();
        assert_eq!(cands.len(), 3);
        let mut total = 0.0;
        for mask in 0u32..8 {
            let subset: Vec<f64> = (0..3)
                .filter(|k| mask >> k & 1 == 1)
                .map(|k| cands[k])
                .collect();
            let mut st = cfg.base_knots.clone();
            st.set_interior(0, subset).unwrap();
            total += log_prior_vs(&st, &cfg).exp();
        }
        let expect: f64 = (0..=3)
            .map(|u| log_q_count(u, &cfg.covariates[0], cfg.varpi).exp())
            .sum();
        assert_abs_diff_eq!(total, expect, epsilon = 1e-12);
    }

    #[test]
    fn beta_prime_restriction() {
        assert!(beta_prime_admissible(5, 100));
        assert!(!beta_prime_admissible(99, 100));
        assert!(!beta_prime_admissible(100, 100));
    }
}
