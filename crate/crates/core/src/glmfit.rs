//! Exponential-family likelihoods and Newton maximum-likelihood fitting.
//!
//! Canonical links only (logit, log, identity), so the natural parameter is
//! the additive predictor and the observed information of eta is
//! `diag(b''(eta))/phi`. The fit also produces everything the marginal
//! likelihood needs: the weighted-centered basis, the Wald statistic and the
//! Cholesky factor used later for coefficient sampling.

use crate::linalg::{self, LinalgError};
use crate::splines::BasisMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("response value {value} at row {index} outside the family support")]
    ResponseOutOfSupport { index: usize, value: f64 },
    #[error("dimension mismatch: basis has {rows} rows, response has {len}")]
    DimensionMismatch { rows: usize, len: usize },
    #[error("Newton iterations did not converge within {iterations} steps")]
    NonConvergence { iterations: usize },
    #[error("likelihood is unbounded (separation-type divergence)")]
    Separation,
    #[error("model matrix is rank deficient: {0}")]
    RankDeficient(#[from] LinalgError),
}

/// Exponential-family specification under the canonical link.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    BernoulliLogit,
    PoissonLog,
    /// Gaussian with identity link and a known dispersion (variance) `phi`.
    /// The unknown-precision Gaussian path lives in the `gauss` module.
    GaussianIdentity {
        phi: f64,
    },
}

impl Family {
    pub fn gaussian() -> Family {
        Family::GaussianIdentity { phi: 1.0 }
    }

    pub fn phi(&self) -> f64 {
        match self {
            Family::GaussianIdentity { phi } => *phi,
            _ => 1.0,
        }
    }

    /// Cumulant function `b(theta)`.
    pub fn b(&self, theta: f64) -> f64 {
        match self {
            Family::BernoulliLogit => {
                if theta > 0.0 {
                    theta + (-theta).exp().ln_1p()
                } else {
                    theta.exp().ln_1p()
                }
            }
            Family::PoissonLog => theta.exp(),
            Family::GaussianIdentity { .. } => 0.5 * theta * theta,
        }
    }

    /// Mean function `b'(theta)`.
    pub fn b_prime(&self, theta: f64) -> f64 {
        match self {
            Family::BernoulliLogit => {
                if theta >= 0.0 {
                    1.0 / (1.0 + (-theta).exp())
                } else {
                    let e = theta.exp();
                    e / (1.0 + e)
                }
            }
            Family::PoissonLog => theta.exp(),
            Family::GaussianIdentity { .. } => theta,
        }
    }

    /// Variance function `b''(theta)`, strictly positive on the natural
    /// parameter domain.
    pub fn b_double_prime(&self, theta: f64) -> f64 {
        match self {
            Family::BernoulliLogit => {
                let p = self.b_prime(theta);
                p * (1.0 - p)
            }
            Family::PoissonLog => theta.exp(),
            Family::GaussianIdentity { .. } => 1.0,
        }
    }

    /// Normalizing term `c(y, phi)` of the log density.
    pub fn c(&self, y: f64) -> f64 {
        match self {
            Family::BernoulliLogit => 0.0,
            Family::PoissonLog => -ln_gamma(y + 1.0),
            Family::GaussianIdentity { phi } => {
                -0.5 * y * y / phi - 0.5 * (2.0 * std::f64::consts::PI * phi).ln()
            }
        }
    }

    pub fn validate_response(&self, y: ArrayView1<f64>) -> Result<(), FitError> {
        for (i, &v) in y.iter().enumerate() {
            let ok = match self {
                Family::BernoulliLogit => v == 0.0 || v == 1.0,
                Family::PoissonLog => v >= 0.0 && v.fract() == 0.0 && v.is_finite(),
                Family::GaussianIdentity { .. } => v.is_finite(),
            };
            if !ok {
                return Err(FitError::ResponseOutOfSupport { index: i, value: v });
            }
        }
        Ok(())
    }

    /// Threshold on |eta| beyond which a non-converged fit is classified as
    /// separation-type divergence rather than slow convergence.
    fn eta_guard(&self) -> f64 {
        match self {
            Family::BernoulliLogit => 36.0,
            Family::PoissonLog => 300.0,
            Family::GaussianIdentity { .. } => f64::INFINITY,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::BernoulliLogit => "bernoulli",
            Family::PoissonLog => "poisson",
            Family::GaussianIdentity { .. } => "gaussian",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bernoulli" | "binomial" | "logistic" | "logit" => Some(Family::BernoulliLogit),
            "poisson" => Some(Family::PoissonLog),
            "gaussian" | "normal" => Some(Family::gaussian()),
            _ => None,
        }
    }
}

/// `sum_i [y_i theta_i - b(theta_i)]/phi + c(y_i, phi)` under the canonical
/// link `theta = eta`.
pub fn log_likelihood(
    y: ArrayView1<f64>,
    eta: ArrayView1<f64>,
    fam: &Family,
) -> Result<f64, FitError> {
    fam.validate_response(y)?;
    if y.len() != eta.len() {
        return Err(FitError::DimensionMismatch {
            rows: eta.len(),
            len: y.len(),
        });
    }
    let phi = fam.phi();
    let mut ll = 0.0;
    for (&yi, &ei) in y.iter().zip(eta.iter()) {
        ll += (yi * ei - fam.b(ei)) / phi + fam.c(yi);
    }
    Ok(ll)
}

/// The scalar fit statistics entering the marginal-likelihood formulas.
#[derive(Clone, Copy, Debug)]
pub struct FitSummary {
    pub loglik: f64,
    pub info_trace: f64,
    pub q_wald: f64,
}

/// MLE artifacts for one model.
#[derive(Clone, Debug)]
pub struct FitState {
    pub alpha_hat: f64,
    pub beta_hat: Array1<f64>,
    pub eta_hat: Array1<f64>,
    pub info_diag: Array1<f64>,
    pub info_trace: f64,
    pub q_wald: f64,
    pub loglik_at_mle: f64,
    pub pseudo_r2: f64,
    /// Lower Cholesky factor of `Btilde' J Btilde`.
    pub(crate) chol_btjb: Array2<f64>,
    /// `1' J B` (weighted column sums of the uncentered basis).
    pub(crate) jtb: Array1<f64>,
}

impl FitState {
    pub fn j(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            loglik: self.loglik_at_mle,
            info_trace: self.info_trace,
            q_wald: self.q_wald,
        }
    }
}

/// Centers the columns of `B` by the weighted average with the information
/// weights: `Btilde = [I - tr(J)^-1 1 1' J] B`.
pub fn weighted_center(b: ArrayView2<f64>, info_diag: ArrayView1<f64>) -> Array2<f64> {
    let trace: f64 = info_diag.sum();
    let weighted_means = info_diag.dot(&b) / trace;
    let mut out = b.to_owned();
    for mut row in out.rows_mut() {
        row -= &weighted_means;
    }
    out
}

/// `1 - exp(-q/n)`, the goodness-of-fit proxy for non-Gaussian families.
pub fn pseudo_r2(q: f64, n: usize) -> f64 {
    -(-q / n as f64).exp_m1()
}

pub fn fit_mle(basis: &BasisMatrix, y: &Array1<f64>, fam: &Family) -> Result<FitState, FitError> {
    fit_mle_matrix(basis.values().view(), y, fam)
}

const MAX_NEWTON_ITERS: usize = 100;
const MAX_HALVINGS: usize = 30;
const SCORE_TOL: f64 = 1e-8;
const LOGLIK_REL_TOL: f64 = 1e-12;

/// Newton fit of `(alpha, beta)` on `[1 | B]` with step halving. `b` may have
/// zero columns (intercept-only model).
pub fn fit_mle_matrix(
    b: ArrayView2<f64>,
    y: &Array1<f64>,
    fam: &Family,
) -> Result<FitState, FitError> {
    let n = y.len();
    if b.nrows() != n || n == 0 {
        return Err(FitError::DimensionMismatch {
            rows: b.nrows(),
            len: n,
        });
    }
    fam.validate_response(y.view())?;
    let j = b.ncols();
    let phi = fam.phi();
    let y_bar = y.sum() / n as f64;
    let mut alpha = match fam {
        Family::BernoulliLogit => {
            let p = y_bar.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
        Family::PoissonLog => y_bar.max(1e-6).ln(),
        Family::GaussianIdentity { .. } => y_bar,
    };
    let mut beta = Array1::<f64>::zeros(j);
    let eta_of = |a: f64, bet: &Array1<f64>| -> Array1<f64> {
        let mut e = b.dot(bet);
        e += a;
        e
    };
    let mut eta = eta_of(alpha, &beta);
    let mut ll = log_likelihood(y.view(), eta.view(), fam)?;
    let mut converged = false;
    for _ in 0..MAX_NEWTON_ITERS {
        if !ll.is_finite() || eta.iter().any(|e| !e.is_finite()) {
            return Err(FitError::Separation);
        }
        let mu = eta.mapv(|e| fam.b_prime(e));
        let w = eta.mapv(|e| fam.b_double_prime(e) / phi);
        let resid = (y - &mu).mapv(|r| r / phi);
        let s0: f64 = resid.sum();
        let s = b.t().dot(&resid);
        let max_score = s.iter().fold(s0.abs(), |m, v| m.max(v.abs()));
        if max_score < SCORE_TOL {
            converged = true;
            break;
        }
        // Hessian of the negative log-likelihood over (alpha, beta)
        let mut wb = b.to_owned();
        for (mut row, &wi) in wb.rows_mut().into_iter().zip(w.iter()) {
            row *= wi;
        }
        let h_bb = b.t().dot(&wb);
        let h_ab = wb.sum_axis(Axis(0));
        let h_aa: f64 = w.sum();
        let dim = j + 1;
        let mut h = Array2::<f64>::zeros((dim, dim));
        h[[0, 0]] = h_aa;
        for k in 0..j {
            h[[0, k + 1]] = h_ab[k];
            h[[k + 1, 0]] = h_ab[k];
            for l in 0..j {
                h[[k + 1, l + 1]] = h_bb[[k, l]];
            }
        }
        let mut g = Array1::<f64>::zeros(dim);
        g[0] = s0;
        for k in 0..j {
            g[k + 1] = s[k];
        }
        let delta = linalg::solve_spd(h.view(), g.view())?;
        // step-halving line search keeping the log-likelihood nondecreasing
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let a_try = alpha + step * delta[0];
            let b_try = &beta + &delta.slice(ndarray::s![1..]).mapv(|d| step * d);
            let eta_try = eta_of(a_try, &b_try);
            let ll_try = log_likelihood(y.view(), eta_try.view(), fam)?;
            if ll_try.is_finite() && ll_try >= ll - 1e-10 {
                alpha = a_try;
                beta = b_try;
                eta = eta_try;
                let rel_change = (ll_try - ll).abs() / (1.0 + ll.abs());
                ll = ll_try;
                accepted = true;
                if rel_change < LOGLIK_REL_TOL {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = converged || max_score < SCORE_TOL;
            break;
        }
    }
    if !converged {
        let guard = fam.eta_guard();
        if eta.iter().any(|e| e.abs() > guard) {
            return Err(FitError::Separation);
        }
        return Err(FitError::NonConvergence {
            iterations: MAX_NEWTON_ITERS,
        });
    }
    let info_diag = eta.mapv(|e| fam.b_double_prime(e) / phi);
    if info_diag.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(FitError::Separation);
    }
    let info_trace: f64 = info_diag.sum();
    let (chol_btjb, jtb, q_wald) = if j > 0 {
        let b_tilde = weighted_center(b, info_diag.view());
        let mut wbt = b_tilde.clone();
        for (mut row, &wi) in wbt.rows_mut().into_iter().zip(info_diag.iter()) {
            row *= wi;
        }
        let m = b_tilde.t().dot(&wbt);
        let l = linalg::cholesky(m.view())?;
        let jtb = info_diag.dot(&b);
        // q = || L' beta ||^2 is nonnegative by construction
        let mut q = 0.0;
        for r in 0..j {
            let mut acc = 0.0;
            for c in r..j {
                acc += l[[c, r]] * beta[c];
            }
            q += acc * acc;
        }
        (l, jtb, q)
    } else {
        (Array2::zeros((0, 0)), Array1::zeros(0), 0.0)
    };
    let r2 = pseudo_r2(q_wald, n);
    Ok(FitState {
        alpha_hat: alpha,
        beta_hat: beta,
        eta_hat: eta,
        info_diag,
        info_trace,
        q_wald,
        loglik_at_mle: ll,
        pseudo_r2: r2,
        chol_btjb,
        jtb,
    })
}
