//! Posterior exploration over knot configurations and the conditional draws
//! of `(g, alpha, beta)` given a model.
//!
//! Knot moves only need the marginal likelihood, so coefficient-level
//! quantities are sampled lazily at retained iterations. Candidate models
//! whose MLE fails (separation, rank deficiency) are treated as rejected
//! proposals and counted, never as chain aborts.

pub mod ess;

use crate::gauss::{
    fit_gauss, log_marginal_gauss_tcch, sample_gauss_conditionals, sample_gauss_g, GaussFitState,
    GaussGSampler,
};
use crate::glmfit::{fit_mle, Family, FitError, FitState};
use crate::knotmodel::{self, KnotModelError, KnotPriorConfig, KnotStrategy};
use crate::linalg;
use crate::marginal::{log_marginal_tcch, CacheKey, CachedModel, MarginalError, ModelCache};
use crate::specfun::tcch::{GPriorFamily, ResolvedGPrior, TcchSliceChain};
use crate::specfun::{tcch_sample_exact, SpecFunError};
use crate::splines::{build_basis, BasisMatrix, KnotState, SplineError};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    KnotModel(#[from] KnotModelError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("even-knot model space has {size} models, over the enumeration budget {budget}; use the Metropolis-Hastings sampler")]
    EnumerationBudget { size: u128, budget: u128 },
    #[error("no admissible model to initialize the chain: {0}")]
    NoAdmissibleModel(String),
    #[error("invalid chain options: {0}")]
    BadOptions(String),
    #[error("current model lost its fit: {0}")]
    RefitFailed(#[from] FitError),
}

/// Response model: exponential family with known dispersion through the
/// Laplace path, or Gaussian with unknown precision through the exact path.
#[derive(Clone, Debug, PartialEq)]
pub enum ResponseModel {
    Glm(Family),
    GaussianUnknownPrecision,
}

impl ResponseModel {
    pub fn parse(s: &str) -> Option<ResponseModel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Some(ResponseModel::GaussianUnknownPrecision),
            other => Family::parse(other).map(ResponseModel::Glm),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ResponseModel::Glm(f) => f.name(),
            ResponseModel::GaussianUnknownPrecision => "gaussian",
        }
    }
}

/// Per-model fit artifacts, by response path.
#[derive(Clone, Debug)]
pub enum ModelFit {
    Glm(FitState),
    Gauss(GaussFitState),
}

/// Immutable per-run context: data, response model, priors, and the optional
/// marginal-likelihood cache.
pub struct ModelScorer {
    pub design: Arc<Array2<f64>>,
    pub y: Array1<f64>,
    pub response: ResponseModel,
    pub gprior: GPriorFamily,
    pub knot_cfg: KnotPriorConfig,
    cache: Option<ModelCache>,
    fit_failures: AtomicU64,
}

/// Outcome of scoring one candidate model.
pub struct Evaluation {
    pub log_marginal: f64,
    pub log_prior: f64,
    /// Present when the basis had to be built/edited for this evaluation.
    pub basis: Option<BasisMatrix>,
}

pub const DEFAULT_CACHE_CAPACITY: usize = 100_000;

impl ModelScorer {
    pub fn new(
        design: Array2<f64>,
        y: Array1<f64>,
        response: ResponseModel,
        gprior: GPriorFamily,
        knot_cfg: KnotPriorConfig,
        cache_capacity: Option<usize>,
    ) -> Result<Self, SamplerError> {
        if design.nrows() != y.len() || design.nrows() == 0 {
            return Err(SamplerError::BadOptions(format!(
                "design has {} rows but response has {}",
                design.nrows(),
                y.len()
            )));
        }
        if knot_cfg.n_covariates() != design.ncols() {
            return Err(SamplerError::BadOptions(
                "knot configuration does not match the design".into(),
            ));
        }
        // continuous free-knot states essentially never repeat, so caching is
        // disabled for that strategy
        let cache = match knot_cfg.strategy {
            KnotStrategy::FreeKnot => None,
            _ => cache_capacity.map(ModelCache::new),
        };
        Ok(ModelScorer {
            design: Arc::new(design),
            y,
            response,
            gprior,
            knot_cfg,
            cache,
            fit_failures: AtomicU64::new(0),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn fit_failures(&self) -> u64 {
        self.fit_failures.load(Ordering::Relaxed)
    }

    pub fn cache(&self) -> Option<&ModelCache> {
        self.cache.as_ref()
    }

    fn cache_key(&self, knots: &KnotState) -> Option<CacheKey> {
        match self.knot_cfg.strategy {
            KnotStrategy::EvenKnot => Some(CacheKey::counts(knots)),
            KnotStrategy::VsKnot => {
                if self
                    .knot_cfg
                    .covariates
                    .iter()
                    .all(|c| c.candidates.len() <= 64)
                {
                    Some(CacheKey::subset(knots, &self.knot_cfg.candidate_grids()))
                } else {
                    Some(CacheKey::quantized(knots))
                }
            }
            KnotStrategy::FreeKnot => None,
        }
    }

    /// Knot prior with the beta-prime properness indicator folded in. The
    /// full-column-rank indicator is applied at fit time.
    pub fn log_prior(&self, knots: &KnotState) -> f64 {
        let lp = knotmodel::log_prior(knots, &self.knot_cfg);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        if matches!(self.gprior, GPriorFamily::BetaPrime)
            && !knotmodel::beta_prime_admissible(knots.total_columns(), self.n())
        {
            return f64::NEG_INFINITY;
        }
        lp
    }

    /// Fits the model and returns its log marginal likelihood; `None` means
    /// the candidate is rejected (fit failure or improper prior).
    fn fit_and_marginal(&self, basis: &BasisMatrix) -> Option<(f64, CachedModel)> {
        let j = basis.ncols();
        match &self.response {
            ResponseModel::Glm(fam) => match fit_mle(basis, &self.y, fam) {
                Ok(fit) => {
                    let m = log_marginal_tcch(&fit.summary(), &self.gprior, self.n(), j).ok()?;
                    let cached = CachedModel {
                        log_marginal: m,
                        loglik: fit.loglik_at_mle,
                        info_trace: fit.info_trace,
                        q_wald: fit.q_wald,
                    };
                    Some((m, cached))
                }
                Err(_) => {
                    self.fit_failures.fetch_add(1, Ordering::Relaxed);
                    None
                }
            },
            ResponseModel::GaussianUnknownPrecision => match fit_gauss(basis, &self.y) {
                Ok(fit) => {
                    let m = log_marginal_gauss_tcch(&fit, &self.gprior).ok()?;
                    // the Gaussian path caches the marginal with its own
                    // deviance-style summary
                    let cached = CachedModel {
                        log_marginal: m,
                        loglik: f64::NAN,
                        info_trace: self.n() as f64,
                        q_wald: -(self.n() as f64) * (1.0 - fit.r2).ln(),
                    };
                    Some((m, cached))
                }
                Err(_) => {
                    self.fit_failures.fetch_add(1, Ordering::Relaxed);
                    None
                }
            },
        }
    }

    /// Scores a candidate model: prior support check, cache lookup, then
    /// fit + marginal on a miss. `edited` may carry an incrementally edited
    /// basis to avoid a rebuild.
    pub fn evaluate(&self, knots: &KnotState, edited: Option<BasisMatrix>) -> Option<Evaluation> {
        let log_prior = self.log_prior(knots);
        if log_prior == f64::NEG_INFINITY {
            return None;
        }
        let key = self.cache_key(knots);
        if let (Some(cache), Some(k)) = (self.cache.as_ref(), key.as_ref()) {
            if let Some(hit) = cache.get(k) {
                return Some(Evaluation {
                    log_marginal: hit.log_marginal,
                    log_prior,
                    basis: edited,
                });
            }
        }
        let basis = match edited {
            Some(b) => b,
            None => build_basis(Arc::clone(&self.design), knots).ok()?,
        };
        let (m, cached) = self.fit_and_marginal(&basis)?;
        if let (Some(cache), Some(k)) = (self.cache.as_ref(), key) {
            cache.insert(k, cached);
        }
        Some(Evaluation {
            log_marginal: m,
            log_prior,
            basis: Some(basis),
        })
    }

    /// Full fit of an admitted model (used at retained iterations).
    pub fn fit_full(&self, basis: &BasisMatrix) -> Result<ModelFit, FitError> {
        match &self.response {
            ResponseModel::Glm(fam) => Ok(ModelFit::Glm(fit_mle(basis, &self.y, fam)?)),
            ResponseModel::GaussianUnknownPrecision => {
                Ok(ModelFit::Gauss(fit_gauss(basis, &self.y)?))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Conditional draws given a model
// ---------------------------------------------------------------------------

/// Draws `g` from its conditional posterior given the fitted model: the
/// point mass for the unit-information prior, the exact truncated-gamma
/// route where available, and the slice chain otherwise.
pub fn sample_g<R: Rng + ?Sized>(
    fit: &FitState,
    prior: &GPriorFamily,
    rng: &mut R,
    slice: &mut TcchSliceChain,
) -> Result<f64, SamplerError> {
    let n = fit.eta_hat.len();
    match prior.posterior(n, fit.j(), fit.q_wald)? {
        ResolvedGPrior::PointMass(g) => Ok(g),
        ResolvedGPrior::Mixture(p) => {
            let v = if prior.has_exact_posterior_sampler() {
                tcch_sample_exact(&p, rng)?
            } else {
                // ten internal transitions per requested draw bound the
                // autocorrelation; the chain state persists across calls
                slice.draw(&p, 10, rng)?
            };
            Ok(1.0 / v - 1.0)
        }
    }
}

/// Draws `(alpha, beta)` from their exact Gaussian conditionals given `g`.
pub fn sample_coefficients<R: Rng + ?Sized>(
    fit: &FitState,
    g: f64,
    rng: &mut R,
) -> (f64, Array1<f64>) {
    let j = fit.j();
    let shrink = g / (g + 1.0);
    let mut beta = Array1::<f64>::zeros(j);
    if j > 0 {
        let z = Array1::from_shape_fn(j, |_| rng.sample::<f64, _>(StandardNormal));
        let corr = linalg::solve_lower_transpose(fit.chol_btjb.view(), z.view())
            .expect("fit carries a valid Cholesky factor");
        for k in 0..j {
            beta[k] = shrink * fit.beta_hat[k] + shrink.sqrt() * corr[k];
        }
    }
    let z0: f64 = rng.sample(StandardNormal);
    let mut mean_shift = 0.0;
    for k in 0..j {
        mean_shift += fit.jtb[k] * (beta[k] - fit.beta_hat[k]);
    }
    let alpha = fit.alpha_hat - mean_shift / fit.info_trace + z0 / fit.info_trace.sqrt();
    (alpha, beta)
}

// ---------------------------------------------------------------------------
// Posterior draws and functional summaries
// ---------------------------------------------------------------------------

/// Retained posterior draws: model summaries, conditional parameter draws,
/// and the component functions evaluated on the configured grids.
#[derive(Clone, Debug, Default)]
pub struct PosteriorDraws {
    pub counts: Vec<Vec<usize>>,
    pub knots: Vec<Vec<Vec<f64>>>,
    pub g: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Precision draws; populated only for the Gaussian path.
    pub phi: Vec<f64>,
    /// Per covariate: draws x grid evaluations of the centered component.
    pub fj: Vec<Array2<f64>>,
    pub grids: Vec<Vec<f64>>,
    pub log_marginal: Vec<f64>,
}

impl PosteriorDraws {
    /// Appends another chain's draws (grids must match).
    pub fn merge(&mut self, other: PosteriorDraws) {
        if self.fj.is_empty() {
            *self = other;
            return;
        }
        self.counts.extend(other.counts);
        self.knots.extend(other.knots);
        self.g.extend(other.g);
        self.alpha.extend(other.alpha);
        self.phi.extend(other.phi);
        self.log_marginal.extend(other.log_marginal);
        for (mine, theirs) in self.fj.iter_mut().zip(other.fj) {
            for row in theirs.rows() {
                mine.push_row(row).expect("merged grids must match");
            }
        }
    }

    /// Per-covariate histogram of the posterior over knot counts, with bins
    /// `0..=max_knots`.
    pub fn knot_count_posterior(&self, max_knots: usize) -> Vec<Vec<f64>> {
        let p = self.counts.first().map(Vec::len).unwrap_or(0);
        let mut hist = vec![vec![0.0f64; max_knots + 1]; p];
        for counts in &self.counts {
            for (j, &u) in counts.iter().enumerate() {
                if u <= max_knots {
                    hist[j][u] += 1.0;
                }
            }
        }
        let total = self.counts.len().max(1) as f64;
        for h in &mut hist {
            for v in h.iter_mut() {
                *v /= total;
            }
        }
        hist
    }
}

#[derive(Clone, Debug)]
pub struct CovariateSummary {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FunctionalSummary {
    pub per_covariate: Vec<CovariateSummary>,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[n - 1]
    }
}

/// Pointwise means and equal-tailed 95% credible bands of the component
/// functions, recomputed directly from the stored draws.
pub fn posterior_functional(draws: &PosteriorDraws) -> FunctionalSummary {
    let mut per_covariate = Vec::with_capacity(draws.fj.len());
    for (j, fj) in draws.fj.iter().enumerate() {
        let n_draws = fj.nrows();
        let grid = draws.grids[j].clone();
        let mut mean = Vec::with_capacity(grid.len());
        let mut lower = Vec::with_capacity(grid.len());
        let mut upper = Vec::with_capacity(grid.len());
        for gi in 0..grid.len() {
            let mut col: Vec<f64> = (0..n_draws).map(|d| fj[[d, gi]]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            mean.push(if n_draws == 0 {
                f64::NAN
            } else {
                col.iter().sum::<f64>() / n_draws as f64
            });
            lower.push(quantile_sorted(&col, 0.025));
            upper.push(quantile_sorted(&col, 0.975));
        }
        per_covariate.push(CovariateSummary {
            grid,
            mean,
            lower,
            upper,
        });
    }
    FunctionalSummary { per_covariate }
}

// ---------------------------------------------------------------------------
// The chain
// ---------------------------------------------------------------------------

/// Current chain position (model plus the latest conditional draws).
#[derive(Clone, Debug)]
pub struct ChainState {
    pub knots: KnotState,
    pub basis: BasisMatrix,
    pub log_prior: f64,
    pub log_marginal: f64,
    pub g: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub phi: Option<f64>,
    pub iteration: u64,
}

impl ChainState {
    pub fn log_posterior(&self) -> f64 {
        self.log_marginal + self.log_prior
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveKind {
    CountUp,
    CountDown,
    Add,
    Delete,
    Swap,
    Birth,
    Death,
    Relocate,
}

impl MoveKind {
    pub fn name(&self) -> &'static str {
        match self {
            MoveKind::CountUp => "count-up",
            MoveKind::CountDown => "count-down",
            MoveKind::Add => "add",
            MoveKind::Delete => "delete",
            MoveKind::Swap => "swap",
            MoveKind::Birth => "birth",
            MoveKind::Death => "death",
            MoveKind::Relocate => "relocate",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MoveStats {
    pub stats: Vec<(MoveKind, u64, u64)>,
}

impl MoveStats {
    fn bump(&mut self, kind: MoveKind, accepted: bool) {
        if let Some(e) = self.stats.iter_mut().find(|e| e.0 == kind) {
            e.1 += 1;
            if accepted {
                e.2 += 1;
            }
        } else {
            self.stats.push((kind, 1, u64::from(accepted)));
        }
    }
}

/// `(fit, g, alpha, beta, phi)` drawn at a retained iteration.
pub type ConditionalDraw = (ModelFit, f64, f64, Array1<f64>, Option<f64>);

/// One MCMC chain over knot configurations.
pub struct Chain<'a> {
    scorer: &'a ModelScorer,
    pub state: ChainState,
    rng: ChaCha8Rng,
    slice: TcchSliceChain,
    griddy: GaussGSampler,
    pub moves: MoveStats,
}

impl<'a> Chain<'a> {
    /// Starts at the empty-knot model (linear terms only).
    pub fn new(scorer: &'a ModelScorer, seed: u64) -> Result<Self, SamplerError> {
        let knots = scorer.knot_cfg.base_knots.clone();
        let eval = scorer.evaluate(&knots, None).ok_or_else(|| {
            SamplerError::NoAdmissibleModel("the linear-terms-only model was rejected".into())
        })?;
        let basis = match eval.basis {
            Some(b) => b,
            None => build_basis(Arc::clone(&scorer.design), &knots)?,
        };
        Ok(Chain {
            scorer,
            state: ChainState {
                knots,
                basis,
                log_prior: eval.log_prior,
                log_marginal: eval.log_marginal,
                g: f64::NAN,
                alpha: f64::NAN,
                beta: Vec::new(),
                phi: None,
                iteration: 0,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            slice: TcchSliceChain::new(),
            griddy: GaussGSampler::new(),
            moves: MoveStats::default(),
        })
    }

    fn accept_ratio(&self, eval: &Evaluation, log_proposal_ratio: f64) -> f64 {
        eval.log_marginal + eval.log_prior - self.state.log_posterior() + log_proposal_ratio
    }

    fn commit(&mut self, knots: KnotState, eval: Evaluation) -> Result<(), SamplerError> {
        let basis = match eval.basis {
            Some(b) => b,
            None => build_basis(Arc::clone(&self.scorer.design), &knots)?,
        };
        self.state.knots = knots;
        self.state.basis = basis;
        self.state.log_prior = eval.log_prior;
        self.state.log_marginal = eval.log_marginal;
        Ok(())
    }

    fn try_accept(
        &mut self,
        kind: MoveKind,
        knots: KnotState,
        eval: Option<Evaluation>,
        log_proposal_ratio: f64,
    ) -> Result<bool, SamplerError> {
        let Some(eval) = eval else {
            self.moves.bump(kind, false);
            return Ok(false);
        };
        let log_a = self.accept_ratio(&eval, log_proposal_ratio);
        let accept = log_a >= 0.0 || self.rng.random::<f64>().ln() < log_a;
        if accept {
            self.commit(knots, eval)?;
        }
        self.moves.bump(kind, accept);
        Ok(accept)
    }

    /// One transition appropriate to the configured knot strategy.
    pub fn step(&mut self) -> Result<bool, SamplerError> {
        self.state.iteration += 1;
        match self.scorer.knot_cfg.strategy {
            KnotStrategy::EvenKnot => even_knot_mh(self),
            KnotStrategy::VsKnot => vs_knot_mcmc(self),
            KnotStrategy::FreeKnot => free_knot_rjmcmc(self),
        }
    }

    /// Conditional draws for the current model; refits when the fit was
    /// skipped through a cache hit.
    pub fn draw_conditionals(&mut self) -> Result<ConditionalDraw, SamplerError> {
        let fit = self.scorer.fit_full(&self.state.basis)?;
        let (g, alpha, beta, phi) = match &fit {
            ModelFit::Glm(f) => {
                let g = sample_g(f, &self.scorer.gprior, &mut self.rng, &mut self.slice)?;
                let (alpha, beta) = sample_coefficients(f, g, &mut self.rng);
                (g, alpha, beta, None)
            }
            ModelFit::Gauss(f) => {
                let g = sample_gauss_g(f, &self.scorer.gprior, &mut self.rng, &mut self.griddy)?;
                let (phi, alpha, beta) = sample_gauss_conditionals(f, g, &mut self.rng);
                (g, alpha, beta, Some(phi))
            }
        };
        self.state.g = g;
        self.state.alpha = alpha;
        self.state.beta = beta.to_vec();
        self.state.phi = phi;
        Ok((fit, g, alpha, beta, phi))
    }
}

/// One Metropolis-Hastings transition for even-knot models: pick a covariate
/// uniformly, propose its count plus/minus one, reject proposals outside
/// `{0..max_knots}`.
pub fn even_knot_mh(chain: &mut Chain<'_>) -> Result<bool, SamplerError> {
    let p = chain.scorer.p();
    let j = chain.rng.random_range(0..p);
    let up: bool = chain.rng.random();
    let mut counts = chain.state.knots.counts();
    let max = chain.scorer.knot_cfg.covariates[j].max_knots;
    let kind = if up {
        MoveKind::CountUp
    } else {
        MoveKind::CountDown
    };
    let new_count = if up {
        counts[j] + 1
    } else if counts[j] == 0 {
        chain.moves.bump(kind, false);
        return Ok(false);
    } else {
        counts[j] - 1
    };
    if new_count > max {
        chain.moves.bump(kind, false);
        return Ok(false);
    }
    counts[j] = new_count;
    let knots = chain.scorer.knot_cfg.even_state(&counts)?;
    let eval = chain.scorer.evaluate(&knots, None);
    // the +-1 proposal is symmetric
    chain.try_accept(kind, knots, eval, 0.0)
}

fn vs_candidate_split(chain: &Chain<'_>, j: usize) -> (Vec<f64>, Vec<f64>) {
    let cands = &chain.scorer.knot_cfg.covariates[j].candidates;
    let present: Vec<f64> = chain.state.knots.covariate(j).interior.clone();
    let absent: Vec<f64> = cands
        .iter()
        .copied()
        .filter(|c| !present.iter().any(|t| t == c))
        .collect();
    (present, absent)
}

fn vs_legal_moves(present: usize, absent: usize) -> Vec<MoveKind> {
    let mut m = Vec::with_capacity(3);
    if absent >= 1 {
        m.push(MoveKind::Add);
    }
    if present >= 1 {
        m.push(MoveKind::Delete);
    }
    if present >= 1 && absent >= 1 {
        m.push(MoveKind::Swap);
    }
    m
}

/// One VS-knot transition: add an absent candidate, delete a present knot,
/// or swap one of each, with the move type chosen uniformly among the legal
/// ones and the proposal ratio matched to the reverse move.
pub fn vs_knot_mcmc(chain: &mut Chain<'_>) -> Result<bool, SamplerError> {
    let p = chain.scorer.p();
    let j = chain.rng.random_range(0..p);
    let (present, absent) = vs_candidate_split(chain, j);
    let legal = vs_legal_moves(present.len(), absent.len());
    if legal.is_empty() {
        return Ok(false);
    }
    let kind = legal[chain.rng.random_range(0..legal.len())];
    let n_legal = legal.len() as f64;
    match kind {
        MoveKind::Add => {
            let t = absent[chain.rng.random_range(0..absent.len())];
            let knots = chain.state.knots.insert(j, t)?.0;
            let edited = chain.state.basis.insert_knot(j, t)?;
            let rev_legal = vs_legal_moves(present.len() + 1, absent.len() - 1).len() as f64;
            // forward: choose add, choose among absent; reverse: choose
            // delete, choose among the now present
            let log_q = (n_legal * absent.len() as f64).ln()
                - (rev_legal * (present.len() + 1) as f64).ln();
            let eval = chain.scorer.evaluate(&knots, Some(edited));
            chain.try_accept(kind, knots, eval, log_q)
        }
        MoveKind::Delete => {
            let t = present[chain.rng.random_range(0..present.len())];
            let knots = chain.state.knots.remove(j, t)?.0;
            let edited = chain.state.basis.remove_knot(j, t)?;
            let rev_legal = vs_legal_moves(present.len() - 1, absent.len() + 1).len() as f64;
            let log_q = (n_legal * present.len() as f64).ln()
                - (rev_legal * (absent.len() + 1) as f64).ln();
            let eval = chain.scorer.evaluate(&knots, Some(edited));
            chain.try_accept(kind, knots, eval, log_q)
        }
        MoveKind::Swap => {
            let t_out = present[chain.rng.random_range(0..present.len())];
            let t_in = absent[chain.rng.random_range(0..absent.len())];
            let knots = chain.state.knots.remove(j, t_out)?.0.insert(j, t_in)?.0;
            let edited = chain
                .state
                .basis
                .remove_knot(j, t_out)?
                .insert_knot(j, t_in)?;
            // swap preserves the counts, so the proposal is symmetric
            let eval = chain.scorer.evaluate(&knots, Some(edited));
            chain.try_accept(kind, knots, eval, 0.0)
        }
        _ => unreachable!(),
    }
}

/// One reversible-jump transition for free-knot models with birth, death and
/// relocation moves. Dimension matching needs no Jacobian here: knots index
/// the model directly and the coefficients are integrated out analytically.
pub fn free_knot_rjmcmc(chain: &mut Chain<'_>) -> Result<bool, SamplerError> {
    let p = chain.scorer.p();
    let j = chain.rng.random_range(0..p);
    let cov = &chain.scorer.knot_cfg.covariates[j];
    let u = chain.state.knots.covariate(j).interior.len();
    let mut legal = Vec::with_capacity(3);
    if u < cov.max_knots && !cov.linear_only {
        legal.push(MoveKind::Birth);
    }
    if u >= 1 {
        legal.push(MoveKind::Death);
        legal.push(MoveKind::Relocate);
    }
    if legal.is_empty() {
        return Ok(false);
    }
    let kind = legal[chain.rng.random_range(0..legal.len())];
    let n_legal = legal.len() as f64;
    let range = cov.boundary_high - cov.boundary_low;
    let legal_count = |u_new: usize| -> f64 {
        let mut c = 0;
        if u_new < cov.max_knots && !cov.linear_only {
            c += 1;
        }
        if u_new >= 1 {
            c += 2;
        }
        c as f64
    };
    match kind {
        MoveKind::Birth => {
            let t = cov.boundary_low + chain.rng.random::<f64>() * range;
            let knots = match chain.state.knots.insert(j, t) {
                Ok((k, _)) => k,
                Err(_) => {
                    // collision with an existing knot (measure zero)
                    chain.moves.bump(kind, false);
                    return Ok(false);
                }
            };
            let edited = chain.state.basis.insert_knot(j, t)?;
            // forward: birth location density 1/range; reverse: death of one
            // of the u+1 knots under the new state's legal-move count
            let log_q = (n_legal * range).ln() - (legal_count(u + 1) * (u + 1) as f64).ln();
            let eval = chain.scorer.evaluate(&knots, Some(edited));
            chain.try_accept(kind, knots, eval, log_q)
        }
        MoveKind::Death => {
            let present = chain.state.knots.covariate(j).interior.clone();
            let t = present[chain.rng.random_range(0..present.len())];
            let knots = chain.state.knots.remove(j, t)?.0;
            let edited = chain.state.basis.remove_knot(j, t)?;
            let log_q = (n_legal * u as f64).ln() - (legal_count(u - 1) * range).ln();
            let eval = chain.scorer.evaluate(&knots, Some(edited));
            chain.try_accept(kind, knots, eval, log_q)
        }
        MoveKind::Relocate => {
            let present = chain.state.knots.covariate(j).interior.clone();
            let t_old = present[chain.rng.random_range(0..present.len())];
            let t_new = cov.boundary_low + chain.rng.random::<f64>() * range;
            let removed = chain.state.knots.remove(j, t_old)?.0;
            let knots = match removed.insert(j, t_new) {
                Ok((k, _)) => k,
                Err(_) => {
                    chain.moves.bump(kind, false);
                    return Ok(false);
                }
            };
            let edited = chain
                .state
                .basis
                .remove_knot(j, t_old)?
                .insert_knot(j, t_new)?;
            // symmetric: same knot count, uniform redraw both ways
            let eval = chain.scorer.evaluate(&knots, Some(edited));
            chain.try_accept(kind, knots, eval, 0.0)
        }
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// Chain driver
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ChainOptions {
    pub length: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Evaluation grid per covariate for the component functions.
    pub grids: Vec<Vec<f64>>,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            length: 10_000,
            burn_in: 2_000,
            thin: 4,
            seed: 0,
            grids: Vec::new(),
        }
    }
}

/// Everything a finished chain reports.
pub struct ChainRun {
    pub draws: PosteriorDraws,
    pub moves: MoveStats,
    pub fit_failures: u64,
    pub runtime_seconds: f64,
    /// Log posterior (marginal + prior) at every post-burn-in iteration.
    pub log_post_trace: Vec<f64>,
    pub ess: f64,
}

fn record_draw(
    chain: &mut Chain<'_>,
    grids: &[Vec<f64>],
    draws: &mut PosteriorDraws,
) -> Result<(), SamplerError> {
    let (_fit, g, alpha, beta, phi) = chain.draw_conditionals()?;
    let state = &chain.state;
    draws.counts.push(state.knots.counts());
    draws.knots.push(
        state
            .knots
            .covariates()
            .iter()
            .map(|c| c.interior.clone())
            .collect(),
    );
    draws.g.push(g);
    draws.alpha.push(alpha);
    if let Some(phi) = phi {
        draws.phi.push(phi);
    }
    draws.log_marginal.push(state.log_marginal);
    for (j, grid) in grids.iter().enumerate() {
        let range = state.basis.column_range(j);
        let beta_block = &beta.as_slice().unwrap()[range];
        let row: Vec<f64> = grid
            .iter()
            .map(|&u| state.basis.eval_component_dot(j, u, beta_block))
            .collect();
        let fj = &mut draws.fj[j];
        fj.push_row(ndarray::ArrayView1::from(&row)).unwrap();
    }
    Ok(())
}

/// Runs one MCMC chain and collects thinned posterior draws.
pub fn run_chain(scorer: &ModelScorer, opts: &ChainOptions) -> Result<ChainRun, SamplerError> {
    if opts.length <= opts.burn_in {
        return Err(SamplerError::BadOptions(format!(
            "chain length {} must exceed burn-in {}",
            opts.length, opts.burn_in
        )));
    }
    if !opts.grids.is_empty() && opts.grids.len() != scorer.p() {
        return Err(SamplerError::BadOptions(
            "one evaluation grid per covariate is required".into(),
        ));
    }
    let start = Instant::now();
    let mut chain = Chain::new(scorer, opts.seed)?;
    let thin = opts.thin.max(1);
    let mut draws = PosteriorDraws {
        grids: opts.grids.clone(),
        fj: opts
            .grids
            .iter()
            .map(|g| Array2::zeros((0, g.len())))
            .collect(),
        ..Default::default()
    };
    let mut log_post_trace = Vec::with_capacity(opts.length - opts.burn_in);
    for it in 0..opts.length {
        chain.step()?;
        if it >= opts.burn_in {
            log_post_trace.push(chain.state.log_posterior());
            if (it - opts.burn_in).is_multiple_of(thin) {
                record_draw(&mut chain, &opts.grids, &mut draws)?;
            }
        }
    }
    let ess = ess::effective_sample_size(&log_post_trace);
    Ok(ChainRun {
        draws,
        moves: chain.moves.clone(),
        fit_failures: scorer.fit_failures(),
        runtime_seconds: start.elapsed().as_secs_f64(),
        log_post_trace,
        ess,
    })
}

// ---------------------------------------------------------------------------
// Exact enumeration of even-knot models
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct EnumeratedModel {
    pub counts: Vec<usize>,
    pub log_prior: f64,
    pub log_marginal: f64,
    pub prob: f64,
}

#[derive(Clone, Debug)]
pub struct EnumeratedPosterior {
    pub models: Vec<EnumeratedModel>,
}

impl EnumeratedPosterior {
    pub fn prob_of_counts(&self, counts: &[usize]) -> f64 {
        self.models
            .iter()
            .find(|m| m.counts == counts)
            .map(|m| m.prob)
            .unwrap_or(0.0)
    }
}

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 100_000;

/// Enumerates all admissible even-knot count vectors and returns the exact
/// normalized model posterior (MCMC-free).
pub fn enumerate_even(
    scorer: &ModelScorer,
    budget: u128,
) -> Result<EnumeratedPosterior, SamplerError> {
    if scorer.knot_cfg.strategy != KnotStrategy::EvenKnot {
        return Err(SamplerError::BadOptions(
            "enumeration applies to the even-knot strategy".into(),
        ));
    }
    let caps: Vec<usize> = scorer
        .knot_cfg
        .covariates
        .iter()
        .map(|c| if c.linear_only { 0 } else { c.max_knots })
        .collect();
    let size: u128 = caps.iter().map(|&m| (m + 1) as u128).product();
    if size > budget {
        return Err(SamplerError::EnumerationBudget { size, budget });
    }
    let mut counts = vec![0usize; caps.len()];
    let mut scored: Vec<(Vec<usize>, f64, f64)> = Vec::new();
    loop {
        let knots = scorer.knot_cfg.even_state(&counts)?;
        if let Some(eval) = scorer.evaluate(&knots, None) {
            scored.push((counts.clone(), eval.log_prior, eval.log_marginal));
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == caps.len() {
                let mx = scored
                    .iter()
                    .map(|(_, lp, lm)| lp + lm)
                    .fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = scored.iter().map(|(_, lp, lm)| (lp + lm - mx).exp()).sum();
                let models = scored
                    .into_iter()
                    .map(|(counts, log_prior, log_marginal)| EnumeratedModel {
                        counts,
                        log_prior,
                        log_marginal,
                        prob: (log_prior + log_marginal - mx).exp() / z,
                    })
                    .collect();
                return Ok(EnumeratedPosterior { models });
            }
            counts[k] += 1;
            if counts[k] <= caps[k] {
                break;
            }
            counts[k] = 0;
            k += 1;
        }
    }
}

/// MCMC-free posterior draws for an enumerable even-knot space: models are
/// sampled independently from the exact posterior, then `(g, alpha, beta)`
/// from their conditionals.
pub fn run_enumerated(
    scorer: &ModelScorer,
    posterior: &EnumeratedPosterior,
    n_draws: usize,
    opts: &ChainOptions,
) -> Result<ChainRun, SamplerError> {
    let start = Instant::now();
    let mut chain = Chain::new(scorer, opts.seed)?;
    let mut draws = PosteriorDraws {
        grids: opts.grids.clone(),
        fj: opts
            .grids
            .iter()
            .map(|g| Array2::zeros((0, g.len())))
            .collect(),
        ..Default::default()
    };
    let cum: Vec<f64> = posterior
        .models
        .iter()
        .scan(0.0, |acc, m| {
            *acc += m.prob;
            Some(*acc)
        })
        .collect();
    let mut log_post_trace = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let u: f64 = chain.rng.random();
        let idx = cum
            .partition_point(|&c| c < u)
            .min(posterior.models.len() - 1);
        let model = &posterior.models[idx];
        let knots = scorer.knot_cfg.even_state(&model.counts)?;
        let basis = build_basis(Arc::clone(&scorer.design), &knots)?;
        chain.state.knots = knots;
        chain.state.basis = basis;
        chain.state.log_prior = model.log_prior;
        chain.state.log_marginal = model.log_marginal;
        log_post_trace.push(chain.state.log_posterior());
        record_draw(&mut chain, &opts.grids, &mut draws)?;
    }
    Ok(ChainRun {
        draws,
        moves: MoveStats::default(),
        fit_failures: scorer.fit_failures(),
        runtime_seconds: start.elapsed().as_secs_f64(),
        ess: n_draws as f64,
        log_post_trace,
    })
}
