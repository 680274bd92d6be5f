//! Laplace-approximated log marginal likelihoods under fixed-g and tCCH
//! mixture priors, Bayes factors, and the per-model memo cache.
//!
//! All marginals share the `p(Y|eta_hat) tr(J)^(-1/2)` convention from the
//! alpha integral (no 2*pi factor); the constant cancels in every Bayes
//! factor, so posterior inference is unaffected.

use crate::glmfit::FitSummary;
use crate::specfun::tcch::{GPriorFamily, ResolvedGPrior, TcchParams};
use crate::specfun::{log_phi1, SpecFunError};
use crate::splines::KnotState;
use statrs::function::beta::ln_beta;
use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarginalError {
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("grids must be nonempty")]
    EmptyGrid,
    #[error("pseudo-R^2 must lie in [0, 1), got {0}")]
    BadR2(f64),
}

/// Log marginal likelihood for a fixed dispersion factor `g`:
/// `loglik - log(tr J)/2 - (J/2) log(1+g) - Q/(2(1+g))`.
pub fn log_marginal_fixed_g(fit: &FitSummary, g: f64, j: usize) -> f64 {
    fit.loglik
        - 0.5 * fit.info_trace.ln()
        - 0.5 * j as f64 * (1.0 + g).ln()
        - fit.q_wald / (2.0 * (1.0 + g))
}

/// Log marginal likelihood with the tCCH mixture integrated out, using
/// explicitly resolved (density-form) prior parameters.
pub fn log_marginal_tcch_resolved(
    fit: &FitSummary,
    p: &TcchParams,
    j: usize,
) -> Result<f64, MarginalError> {
    let jh = j as f64 / 2.0;
    let y = 1.0 - p.kappa;
    let num = log_phi1(p.b, p.z, p.a + p.b + jh, (p.s + fit.q_wald / 2.0) / p.nu, y)?;
    let den = log_phi1(p.b, p.z, p.a + p.b, p.s / p.nu, y)?;
    Ok(
        fit.loglik - 0.5 * fit.info_trace.ln() - jh * p.nu.ln() - fit.q_wald / (2.0 * p.nu)
            + ln_beta(p.a + jh, p.b)
            - ln_beta(p.a, p.b)
            + num
            - den,
    )
}

/// Log marginal likelihood under a named g-prior resolved at `(n, j)`.
/// The unit-information prior reduces to `log_marginal_fixed_g` at `g = n`.
pub fn log_marginal_tcch(
    fit: &FitSummary,
    prior: &GPriorFamily,
    n: usize,
    j: usize,
) -> Result<f64, MarginalError> {
    match prior.resolve(n, j)? {
        ResolvedGPrior::PointMass(g) => Ok(log_marginal_fixed_g(fit, g, j)),
        ResolvedGPrior::Mixture(p) => log_marginal_tcch_resolved(fit, &p, j),
    }
}

/// `log BF[1; 2] = log m1 - log m2`.
pub fn log_bayes_factor(m1: f64, m2: f64) -> f64 {
    m1 - m2
}

/// One row of the Bayes-factor table over model size and goodness of fit.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BfRow {
    pub prior: String,
    pub n: usize,
    pub j: usize,
    pub r2: f64,
    pub log_bf: f64,
}

/// Bayes factors for one redundant-knot comparisons (`J` vs `J-1` at equal
/// fit), with the Wald statistic recovered from the pseudo-R^2 by
/// `Q = -n log(1 - R^2)`.
pub fn bf_curve(
    prior: &GPriorFamily,
    n: usize,
    j_grid: &[usize],
    r2_grid: &[f64],
) -> Result<Vec<BfRow>, MarginalError> {
    if j_grid.is_empty() || r2_grid.is_empty() {
        return Err(MarginalError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(j_grid.len() * r2_grid.len());
    for &j in j_grid {
        for &r2 in r2_grid {
            if !(0.0..1.0).contains(&r2) {
                return Err(MarginalError::BadR2(r2));
            }
            let q = -(n as f64) * (1.0 - r2).ln();
            let fit = FitSummary {
                loglik: 0.0,
                info_trace: n as f64,
                q_wald: q,
            };
            let m1 = log_marginal_tcch(&fit, prior, n, j)?;
            let m2 = log_marginal_tcch(&fit, prior, n, j.saturating_sub(1))?;
            rows.push(BfRow {
                prior: prior.name().to_string(),
                n,
                j,
                r2,
                log_bf: log_bayes_factor(m1, m2),
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Model cache
// ---------------------------------------------------------------------------

/// Canonical key of a knot state for memoization.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CacheKey {
    /// Even-knot models are identified by their count vector.
    Counts(Vec<u16>),
    /// VS-knot models are identified by candidate-membership bitmasks.
    Subset(Vec<u64>),
    /// Free-knot states quantized to 1e-12 (off by default: continuous
    /// states essentially never repeat).
    Quantized(Vec<Vec<i64>>),
}

impl CacheKey {
    pub fn counts(knots: &KnotState) -> CacheKey {
        CacheKey::Counts(knots.counts().iter().map(|&c| c as u16).collect())
    }

    /// Bitmask of which candidates are present, per covariate. Candidates are
    /// matched by exact value (knots originate from the candidate grid).
    pub fn subset(knots: &KnotState, candidates: &[Vec<f64>]) -> CacheKey {
        let mut masks = Vec::with_capacity(candidates.len());
        for (j, cand) in candidates.iter().enumerate() {
            debug_assert!(cand.len() <= 64);
            let mut mask = 0u64;
            for &t in &knots.covariate(j).interior {
                if let Some(pos) = cand.iter().position(|&c| c == t) {
                    mask |= 1 << pos;
                }
            }
            masks.push(mask);
        }
        CacheKey::Subset(masks)
    }

    pub fn quantized(knots: &KnotState) -> CacheKey {
        CacheKey::Quantized(
            knots
                .covariates()
                .iter()
                .map(|c| {
                    c.interior
                        .iter()
                        .map(|&t| (t / 1e-12).round() as i64)
                        .collect()
                })
                .collect(),
        )
    }
}

/// Cached per-model quantities: the log marginal plus the fit summary it was
/// computed from.
#[derive(Clone, Copy, Debug)]
pub struct CachedModel {
    pub log_marginal: f64,
    pub loglik: f64,
    pub info_trace: f64,
    pub q_wald: f64,
}

impl CachedModel {
    pub fn summary(&self) -> FitSummary {
        FitSummary {
            loglik: self.loglik,
            info_trace: self.info_trace,
            q_wald: self.q_wald,
        }
    }
}

struct CacheInner {
    map: HashMap<CacheKey, CachedModel>,
    order: VecDeque<CacheKey>,
}

/// Bounded map from canonical knot keys to marginal likelihoods. Concurrent
/// readers are allowed; writers are serialized through the lock. Eviction is
/// first-in-first-out once the capacity bound is reached.
pub struct ModelCache {
    inner: RwLock<CacheInner>,
    capacity: usize,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ModelCache {
    pub fn new(capacity: usize) -> Self {
        ModelCache {
            inner: RwLock::new(CacheInner {
                map: HashMap::new(),
                order: VecDeque::new(),
            }),
            capacity: capacity.max(1),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn get(&self, key: &CacheKey) -> Option<CachedModel> {
        let guard = self.inner.read().expect("cache lock poisoned");
        let hit = guard.map.get(key).copied();
        drop(guard);
        if hit.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
        hit
    }

    pub fn insert(&self, key: CacheKey, value: CachedModel) {
        let mut guard = self.inner.write().expect("cache lock poisoned");
        if let Some(slot) = guard.map.get_mut(&key) {
            *slot = value;
            return;
        }
        if guard.map.len() >= self.capacity {
            if let Some(old) = guard.order.pop_front() {
                guard.map.remove(&old);
            }
        }
        guard.order.push_back(key.clone());
        guard.map.insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("cache lock poisoned").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::tcch::{log_expectation, tcch_moment};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn summary(q: f64, n: usize) -> FitSummary {
        FitSummary {
            loglik: 0.0,
            info_trace: n as f64,
            q_wald: q,
        }
    }

    #[test]
    fn null_model_is_independent_of_g() {
        let fit = summary(0.0, 200);
        let a = log_marginal_fixed_g(&fit, 1.0, 0);
        let b = log_marginal_fixed_g(&fit, 1e6, 0);
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        assert_abs_diff_eq!(a, -0.5 * 200.0f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn point_mass_bayes_factor_is_dimension_penalty() {
        // equal-fit models differing by k columns under g = delta_b
        let fit = summary(37.0, 500);
        let b = 500.0;
        for k in [1usize, 3, 7] {
            let m1 = log_marginal_fixed_g(&fit, b, 10 + k);
            let m2 = log_marginal_fixed_g(&fit, b, 10);
            assert_abs_diff_eq!(
                log_bayes_factor(m1, m2),
                -(k as f64 / 2.0) * (1.0 + b).ln(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn fixed_g_derivative_sign() {
        // d/dg = [Q/(1+g) - J] / (2 (1+g)); check against finite differences
        let fit = summary(25.0, 100);
        let j = 6usize;
        for g in [0.5, 2.0, 10.0, 200.0] {
            let h = 1e-5 * (1.0 + g);
            let fd = (log_marginal_fixed_g(&fit, g + h, j) - log_marginal_fixed_g(&fit, g - h, j))
                / (2.0 * h);
            let closed = (fit.q_wald / (1.0 + g) - j as f64) / (2.0 * (1.0 + g));
            assert_abs_diff_eq!(fd, closed, epsilon = 1e-6 * (1.0 + closed.abs()));
            if fit.q_wald < j as f64 * (1.0 + g) {
                assert!(closed < 0.0);
            }
        }
    }

    #[test]
    fn tcch_marginal_collapses_at_null_model() {
        let fit = summary(0.0, 300);
        let expect = log_marginal_fixed_g(&fit, 300.0, 0);
        for prior in GPriorFamily::mixtures() {
            let v = log_marginal_tcch(&fit, &prior, 300, 0).unwrap();
            assert_abs_diff_eq!(v, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn fixed_g_matches_two_dimensional_laplace_integral() {
        // numerically integrate the quadratic-expansion integrand times the
        // g-prior over (alpha, beta) for a tiny logistic model; the result
        // differs from the marginal only by the documented log(2 pi)/2
        // convention constant from the alpha integral
        use crate::glmfit::{fit_mle_matrix, Family};
        use crate::specfun::quad::{integrate, log_integrate_pieces, LogPiece};
        let n = 15usize;
        let b = ndarray::Array2::from_shape_fn((n, 1), |(i, _)| {
            (i as f64 / (n - 1) as f64) * 2.0 - 1.0
        });
        let mut bc = b;
        {
            let m = bc.column(0).sum() / n as f64;
            bc.column_mut(0).mapv_inplace(|v| v - m);
        }
        let y = ndarray::Array1::from_shape_fn(n, |i| if (i * 5) % 3 != 0 { 1.0 } else { 0.0 });
        let fit = fit_mle_matrix(bc.view(), &y, &Family::BernoulliLogit).unwrap();
        let g = 6.0;
        let analytic = log_marginal_fixed_g(&fit.summary(), g, 1);

        let tr = fit.info_trace;
        let w = fit.eta_hat.mapv(|e| {
            let p = 1.0 / (1.0 + (-e).exp());
            p * (1.0 - p)
        });
        let jtb: f64 = w
            .iter()
            .zip(bc.column(0).iter())
            .map(|(wi, bi)| wi * bi)
            .sum();
        let bt = crate::glmfit::weighted_center(bc.view(), w.view());
        let m_info: f64 = bt
            .column(0)
            .iter()
            .zip(w.iter())
            .map(|(b, w)| b * b * w)
            .sum();
        let (a_hat, b_hat) = (fit.alpha_hat, fit.beta_hat[0]);
        // inner integral over alpha at fixed beta, then an outer log-domain
        // integral over beta
        let log_inner = |beta: f64| -> f64 {
            let shift = jtb * (beta - b_hat) / tr;
            let center = a_hat - shift;
            let half_width = 12.0 / tr.sqrt();
            let v = integrate(
                |alpha: f64| (-(alpha - center).powi(2) * tr / 2.0).exp(),
                center - half_width,
                center + half_width,
                1e-12,
                2000,
            )
            .unwrap();
            let quad_beta = -0.5 * m_info * (beta - b_hat).powi(2);
            let prior = -0.5 * beta * beta * m_info / g
                - 0.5 * (2.0 * std::f64::consts::PI * g / m_info).ln();
            v.ln() + quad_beta + prior
        };
        let spread = 12.0 * (g / m_info).sqrt().max(12.0 / m_info.sqrt());
        let piece = LogPiece {
            lo: b_hat - spread,
            hi: b_hat + spread,
            logf: &log_inner,
        };
        let oracle = fit.loglik_at_mle + log_integrate_pieces(&[piece], 1e-11, 4000).unwrap()
            - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(analytic, oracle, max_relative = 1e-6, epsilon = 1e-6);
    }

    #[test]
    fn marginals_finite_at_large_scale() {
        // no overflow for any named prior at n = 1e5-scale problems
        let n = 100_000usize;
        let j = 50usize;
        let fit = FitSummary {
            loglik: -0.6 * n as f64,
            info_trace: 0.25 * n as f64,
            q_wald: 2.3 * n as f64,
        };
        let mut priors = vec![GPriorFamily::UnitInformation];
        priors.extend(GPriorFamily::mixtures());
        for prior in priors {
            let v = log_marginal_tcch(&fit, &prior, n, j).unwrap();
            assert!(v.is_finite(), "{} overflowed: {v}", prior.name());
        }
    }

    #[test]
    fn tcch_marginal_matches_quadrature_oracle() {
        // direct numerical integration of the fixed-g marginal against the
        // prior density of v = (1+g)^-1
        let n = 500usize;
        let j = 8usize;
        let fit = summary(40.0, n);
        for prior in GPriorFamily::mixtures() {
            let analytic = log_marginal_tcch(&fit, &prior, n, j).unwrap();
            let ResolvedGPrior::Mixture(p) = prior.resolve(n, j).unwrap() else {
                panic!()
            };
            let jh = j as f64 / 2.0;
            let q = fit.q_wald;
            let oracle = fit.loglik - 0.5 * fit.info_trace.ln()
                + log_expectation(&p, &|v| jh * v.ln() - q * v / 2.0, jh).unwrap();
            assert_relative_eq!(analytic, oracle, max_relative = 1e-6, epsilon = 1e-8);
        }
    }

    #[test]
    fn mixture_bayes_factor_is_posterior_shrinkage_moment() {
        // with common resolved hyperparameters, the equal-fit BF for a k-column
        // difference equals E[v^(k/2)] under the smaller model's posterior
        let n = 400usize;
        let j2 = 6usize;
        let q = 33.0;
        let fit = summary(q, n);
        for prior in GPriorFamily::mixtures() {
            let ResolvedGPrior::Mixture(p) = prior.resolve(n, j2).unwrap() else {
                panic!()
            };
            for k in [1usize, 2] {
                let m1 = log_marginal_tcch_resolved(&fit, &p, j2 + k).unwrap();
                let m2 = log_marginal_tcch_resolved(&fit, &p, j2).unwrap();
                let bf = log_bayes_factor(m1, m2);
                let moment = tcch_moment(k as f64 / 2.0, &p.posterior(j2, q)).unwrap();
                assert_relative_eq!(bf, moment.ln(), max_relative = 1e-8, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn bf_curve_unit_information_rows_constant() {
        let rows = bf_curve(
            &GPriorFamily::UnitInformation,
            1000,
            &[2, 10, 40],
            &[0.1, 0.5, 0.9],
        )
        .unwrap();
        let expect = -0.5 * 1001.0f64.ln();
        for r in rows {
            assert_abs_diff_eq!(r.log_bf, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn bf_curve_consistent_with_marginal_differences() {
        let prior = GPriorFamily::Robust;
        let n = 1000usize;
        let rows = bf_curve(&prior, n, &[5, 20], &[0.3]).unwrap();
        for r in rows {
            let q = -(n as f64) * (1.0 - r.r2).ln();
            let fit = summary(q, n);
            let m1 = log_marginal_tcch(&fit, &prior, n, r.j).unwrap();
            let m2 = log_marginal_tcch(&fit, &prior, n, r.j - 1).unwrap();
            assert_abs_diff_eq!(r.log_bf, m1 - m2, epsilon = 1e-12);
        }
    }

    #[test]
    fn cache_bounds_and_counters() {
        let cache = ModelCache::new(2);
        let k1 = CacheKey::Counts(vec![1, 0]);
        let k2 = CacheKey::Counts(vec![0, 1]);
        let k3 = CacheKey::Counts(vec![2, 2]);
        let v = CachedModel {
            log_marginal: -1.0,
            loglik: -0.5,
            info_trace: 10.0,
            q_wald: 3.0,
        };
        assert!(cache.get(&k1).is_none());
        cache.insert(k1.clone(), v);
        cache.insert(k2.clone(), v);
        cache.insert(k3.clone(), v);
        assert_eq!(cache.len(), 2);
        // k1 was evicted first-in-first-out
        assert!(cache.get(&k1).is_none());
        assert!(cache.get(&k3).is_some());
        assert_eq!(cache.hits(), 1);
        assert_eq!(cache.misses(), 2);
    }
}
