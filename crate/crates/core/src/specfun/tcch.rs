//! The truncated compound confluent hypergeometric (tCCH) distribution and
//! the named g-prior family it unifies.
//!
//! A variable `V ~ tCCH(a, b, z, s, nu, kappa)` lives on `(0, 1/nu)` with
//! density proportional to
//! `v^(a-1) (1-nu v)^(b-1) [kappa + (1-kappa) nu v]^(-z) exp(-s v)`,
//! normalized by `Phi_1(b, z, a+b, s/nu, 1-kappa) B(a,b) / (nu^a e^(s/nu))`.
//! Placed on the shrinkage factor `(g+1)^(-1)`, its named parameterizations
//! reproduce the standard mixtures of g-priors.

use super::hyper::{log_integral_unit, log_phi1};
use super::SpecFunError;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma as GammaDist};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma_lr, ln_gamma};

const DEFAULT_REL_TOL: f64 = 1e-12;
const W_EPS: f64 = 1e-14;

/// Parameters of a tCCH distribution in density form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TcchParams {
    pub a: f64,
    pub b: f64,
    pub z: f64,
    pub s: f64,
    pub nu: f64,
    pub kappa: f64,
}

impl TcchParams {
    pub fn new(a: f64, b: f64, z: f64, s: f64, nu: f64, kappa: f64) -> Result<Self, SpecFunError> {
        let p = TcchParams {
            a,
            b,
            z,
            s,
            nu,
            kappa,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SpecFunError> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(SpecFunError::Domain(format!(
                "tCCH requires a > 0 and b > 0, got a={}, b={}",
                self.a, self.b
            )));
        }
        if !(self.nu >= 1.0) {
            return Err(SpecFunError::Domain(format!(
                "tCCH requires nu >= 1, got nu={}",
                self.nu
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(SpecFunError::Domain(format!(
                "tCCH requires kappa > 0, got kappa={}",
                self.kappa
            )));
        }
        for (name, v) in [("z", self.z), ("s", self.s)] {
            if !v.is_finite() {
                return Err(SpecFunError::Domain(format!("tCCH {name} not finite")));
            }
        }
        Ok(())
    }

    /// Upper end of the support `(0, 1/nu)`.
    pub fn support_upper(&self) -> f64 {
        1.0 / self.nu
    }

    /// Conjugate update after observing a model with `j` basis columns and
    /// Wald statistic `q`: `a += j/2`, `s += q/2`.
    pub fn posterior(&self, j: usize, q: f64) -> TcchParams {
        TcchParams {
            a: self.a + j as f64 / 2.0,
            s: self.s + q / 2.0,
            ..*self
        }
    }

    /// Log normalizing constant: the density is `exp(log kernel - log_norm)`.
    fn log_norm(&self) -> Result<f64, SpecFunError> {
        let phi = log_phi1(
            self.b,
            self.z,
            self.a + self.b,
            self.s / self.nu,
            1.0 - self.kappa,
        )?;
        Ok(phi + ln_beta(self.a, self.b) - self.a * self.nu.ln() - self.s / self.nu)
    }
}

/// A tCCH distribution with its normalizer precomputed.
pub struct TcchDist {
    pub params: TcchParams,
    log_norm: f64,
}

impl TcchDist {
    pub fn new(params: TcchParams) -> Result<Self, SpecFunError> {
        params.validate()?;
        let log_norm = params.log_norm()?;
        Ok(TcchDist { params, log_norm })
    }

    pub fn log_pdf(&self, v: f64) -> f64 {
        let p = &self.params;
        if !(v > 0.0) || v >= p.support_upper() {
            return f64::NEG_INFINITY;
        }
        let w = p.nu * v;
        let omw = 1.0 - w;
        (p.a - 1.0) * v.ln() + (p.b - 1.0) * omw.ln()
            - p.z * (1.0 - (1.0 - p.kappa) * omw).ln()
            - p.s * v
            - self.log_norm
    }
}

/// Log density of tCCH at `v`; `-inf` outside the support.
pub fn tcch_log_pdf(v: f64, p: &TcchParams) -> Result<f64, SpecFunError> {
    Ok(TcchDist::new(*p)?.log_pdf(v))
}

/// `k`-th moment `E[V^k]` for real `k >= 0`.
pub fn tcch_moment(k: f64, p: &TcchParams) -> Result<f64, SpecFunError> {
    p.validate()?;
    if !(k >= 0.0) {
        return Err(SpecFunError::Domain(format!(
            "moment order must be >= 0, got {k}"
        )));
    }
    if k == 0.0 {
        return Ok(1.0);
    }
    let y = 1.0 - p.kappa;
    let x = p.s / p.nu;
    let num = log_phi1(p.b, p.z, p.a + p.b + k, x, y)?;
    let den = log_phi1(p.b, p.z, p.a + p.b, x, y)?;
    let log_m = -k * p.nu.ln() + ln_beta(p.a + k, p.b) - ln_beta(p.a, p.b) + num - den;
    Ok(log_m.exp())
}

/// Log of `int_0^(1/nu) kernel(v) * exp(extra(v)) dv` where `kernel` is the
/// unnormalized tCCH density. `extra_left_power` declares any additional
/// `v^p` behavior contributed by `extra` at `v -> 0` so the endpoint
/// substitution stays correct (e.g. `j/2` when `extra` contains
/// `(j/2) ln v`).
pub fn log_integral_kernel(
    p: &TcchParams,
    extra: &dyn Fn(f64) -> f64,
    extra_left_power: f64,
    rel_tol: f64,
) -> Result<f64, SpecFunError> {
    p.validate()?;
    let zeta = p.s / p.nu;
    let logf = move |w: f64, omw: f64| {
        (p.a - 1.0) * w.ln() + (p.b - 1.0) * omw.ln()
            - p.z * (1.0 - (1.0 - p.kappa) * omw).ln()
            - zeta * w
            + extra(w / p.nu)
    };
    // extra_left_power only informs the endpoint substitution; the power
    // itself already lives inside `extra`
    let li = log_integral_unit(p.a + extra_left_power, p.b, &logf, rel_tol)?;
    Ok(li - p.a * p.nu.ln())
}

/// Log of `E[exp(extra(V))]` under the tCCH law, by direct quadrature.
/// This is the independent oracle used to validate the closed-form marginal
/// likelihood and moment identities.
pub fn log_expectation(
    p: &TcchParams,
    extra: &dyn Fn(f64) -> f64,
    extra_left_power: f64,
) -> Result<f64, SpecFunError> {
    let num = log_integral_kernel(p, extra, extra_left_power, DEFAULT_REL_TOL)?;
    Ok(num - p.log_norm()?)
}

/// Like [`log_integral_kernel`] but integrating only over `(0, upper)` with
/// `upper` inside the support; used to build numeric CDF oracles.
pub fn log_integral_kernel_partial(
    p: &TcchParams,
    extra: &dyn Fn(f64) -> f64,
    extra_left_power: f64,
    upper: f64,
    rel_tol: f64,
) -> Result<f64, SpecFunError> {
    p.validate()?;
    if !(upper > 0.0 && upper <= p.support_upper()) {
        return Err(SpecFunError::Domain(format!(
            "partial upper bound {upper} outside (0, {}]",
            p.support_upper()
        )));
    }
    let c = (p.nu * upper).min(1.0);
    let zeta = p.s / p.nu;
    // substitute w = c x over x in (0,1)
    let logf = move |x: f64, omx: f64| {
        let w = c * x;
        let omw = (1.0 - c) + c * omx;
        (p.a - 1.0) * w.ln() + (p.b - 1.0) * omw.ln()
            - p.z * (1.0 - (1.0 - p.kappa) * omw).ln()
            - zeta * w
            + extra(w / p.nu)
    };
    // at x -> 1, w -> c: singular only when the bound touches the support end
    let right_exponent = if c >= 1.0 - 1e-12 { p.b } else { 1.0 };
    let li = log_integral_unit(p.a + extra_left_power, right_exponent, &logf, rel_tol)?;
    Ok(li + c.ln() - p.a * p.nu.ln())
}

// ---------------------------------------------------------------------------
// Named g-prior family (prior placed on (g+1)^(-1))
// ---------------------------------------------------------------------------

/// The named priors on the shrinkage factor `(g+1)^(-1)`, including the
/// unit-information point mass at `g = n`.
#[derive(Clone, Debug, PartialEq)]
pub enum GPriorFamily {
    UnitInformation,
    Uniform,
    HyperG,
    HyperGOverN,
    BetaPrime,
    ZSAdapted,
    Robust,
    Intrinsic,
    CustomTcch(TcchParams),
}

/// Result of resolving a `GPriorFamily` at a given `(n, J)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResolvedGPrior {
    /// Point mass at the given `g`.
    PointMass(f64),
    /// tCCH prior on `(g+1)^(-1)` in density form.
    Mixture(TcchParams),
}

impl GPriorFamily {
    /// Resolves the prior hyperparameters at sample size `n` and model
    /// dimension `j`. The beta-prime prior is proper only when `j < n-1`.
    pub fn resolve(&self, n: usize, j: usize) -> Result<ResolvedGPrior, SpecFunError> {
        let nf = n as f64;
        let jf = j as f64;
        let p = match self {
            GPriorFamily::UnitInformation => return Ok(ResolvedGPrior::PointMass(nf)),
            GPriorFamily::Uniform => TcchParams::new(1.0, 1.0, 0.0, 0.0, 1.0, 1.0)?,
            GPriorFamily::HyperG => TcchParams::new(0.5, 1.0, 0.0, 0.0, 1.0, 1.0)?,
            GPriorFamily::HyperGOverN => TcchParams::new(0.5, 1.0, 1.5, 0.0, 1.0, 1.0 / nf)?,
            GPriorFamily::BetaPrime => {
                if !(jf < nf - 1.0) {
                    return Err(SpecFunError::ImproperPrior(format!(
                        "beta-prime prior requires J < n-1 (J={j}, n={n})"
                    )));
                }
                TcchParams::new(0.25, (nf - jf - 1.5) / 2.0, 0.0, 0.0, 1.0, 1.0)?
            }
            GPriorFamily::ZSAdapted => TcchParams::new(0.5, 1.0, 0.0, (nf + 3.0) / 2.0, 1.0, 1.0)?,
            GPriorFamily::Robust => {
                TcchParams::new(0.5, 1.0, 1.5, 0.0, (nf + 1.0) / (jf + 1.0), 1.0)?
            }
            GPriorFamily::Intrinsic => TcchParams::new(
                0.5,
                0.5,
                1.0,
                0.0,
                (nf + jf + 1.0) / (jf + 1.0),
                (nf + jf + 1.0) / nf,
            )?,
            GPriorFamily::CustomTcch(p) => {
                p.validate()?;
                *p
            }
        };
        Ok(ResolvedGPrior::Mixture(p))
    }

    /// The conditional posterior of `(g+1)^(-1)` given a fitted model with
    /// `j` columns and Wald statistic `q`. `PointMass` stays a point mass.
    pub fn posterior(&self, n: usize, j: usize, q: f64) -> Result<ResolvedGPrior, SpecFunError> {
        match self.resolve(n, j)? {
            ResolvedGPrior::PointMass(g) => Ok(ResolvedGPrior::PointMass(g)),
            ResolvedGPrior::Mixture(p) => Ok(ResolvedGPrior::Mixture(p.posterior(j, q))),
        }
    }

    /// True when the exact truncated-gamma sampler applies to the posterior
    /// (uniform, hyper-g, ZS-adapted, and robust priors).
    pub fn has_exact_posterior_sampler(&self) -> bool {
        matches!(
            self,
            GPriorFamily::Uniform
                | GPriorFamily::HyperG
                | GPriorFamily::ZSAdapted
                | GPriorFamily::Robust
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            GPriorFamily::UnitInformation => "unit-information",
            GPriorFamily::Uniform => "uniform",
            GPriorFamily::HyperG => "hyper-g",
            GPriorFamily::HyperGOverN => "hyper-g-n",
            GPriorFamily::BetaPrime => "beta-prime",
            GPriorFamily::ZSAdapted => "zs-adapted",
            GPriorFamily::Robust => "robust",
            GPriorFamily::Intrinsic => "intrinsic",
            GPriorFamily::CustomTcch(_) => "custom-tcch",
        }
    }

    pub fn parse(s: &str) -> Option<GPriorFamily> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unit-information" | "unit_information" | "unitinfo" | "uip" => {
                Some(GPriorFamily::UnitInformation)
            }
            "uniform" => Some(GPriorFamily::Uniform),
            "hyper-g" | "hyper_g" | "hyperg" => Some(GPriorFamily::HyperG),
            "hyper-g-n" | "hyper-g/n" | "hyper_g_n" | "hypergn" => Some(GPriorFamily::HyperGOverN),
            "beta-prime" | "beta_prime" | "betaprime" => Some(GPriorFamily::BetaPrime),
            "zs-adapted" | "zs_adapted" | "zsadapted" | "zs" => Some(GPriorFamily::ZSAdapted),
            "robust" => Some(GPriorFamily::Robust),
            "intrinsic" => Some(GPriorFamily::Intrinsic),
            _ => None,
        }
    }

    /// The seven mixture priors of the named family (excludes the
    /// unit-information point mass).
    pub fn mixtures() -> [GPriorFamily; 7] {
        [
            GPriorFamily::Uniform,
            GPriorFamily::HyperG,
            GPriorFamily::HyperGOverN,
            GPriorFamily::BetaPrime,
            GPriorFamily::ZSAdapted,
            GPriorFamily::Robust,
            GPriorFamily::Intrinsic,
        ]
    }
}

// ---------------------------------------------------------------------------
// Root finding and truncated-distribution sampling
// ---------------------------------------------------------------------------

/// Finds `x` in `[lo, hi]` with `f(x) = 0` for a nondecreasing `f` that may
/// be `-inf` near `lo`. Illinois-damped regula falsi with bisection fallback.
fn solve_increasing<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    mut fhi: f64,
    tol_x: f64,
) -> f64 {
    if flo >= 0.0 {
        return lo;
    }
    if fhi <= 0.0 {
        return hi;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= tol_x {
            break;
        }
        let x = if flo.is_finite() && fhi.is_finite() && fhi > flo {
            let c = lo - flo * (hi - lo) / (fhi - flo);
            if c > lo && c < hi {
                c
            } else {
                0.5 * (lo + hi)
            }
        } else {
            0.5 * (lo + hi)
        };
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (lo + hi)
}

/// `ln int_0^v t^(a-1) e^(-s t) dt` for `a > 0`, any sign of `s`.
///
/// For `s > 0` this is the (unregularized) lower incomplete gamma in rate
/// form; for `s <= 0` the exponentially tilted series is summed in log space.
fn log_gamma_kernel_cdf(a: f64, s: f64, v: f64) -> f64 {
    if !(v > 0.0) {
        return f64::NEG_INFINITY;
    }
    if s == 0.0 {
        return a * v.ln() - a.ln();
    }
    if s > 0.0 {
        let x = s * v;
        if x >= a + 1.0 {
            // regularized form is far from underflow here
            return gamma_lr(a, x).ln() + ln_gamma(a) - a * s.ln();
        }
        // gamma(a, x) = x^a e^-x / a * sum_k prod_{i<=k} x/(a+i)
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while k < 10_000.0 {
            term *= x / (a + k);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            k += 1.0;
        }
        return a * v.ln() - x - a.ln() + sum.ln();
    }
    // s < 0: int_0^v t^(a-1) e^(m t / v) dt = v^a sum_k m^k / (k! (a+k))
    let m = -s * v;
    let mut log_term = -a.ln();
    let mut mx = log_term;
    let mut acc = 1.0f64;
    let k_max = (m + 12.0 * m.sqrt() + 60.0) as usize;
    for k in 0..k_max {
        let kf = k as f64;
        log_term += m.ln() - (kf + 1.0).ln() + ((a + kf) / (a + kf + 1.0)).ln();
        if log_term > mx {
            acc = acc * (mx - log_term).exp() + 1.0;
            mx = log_term;
        } else {
            acc += (log_term - mx).exp();
        }
        if k as f64 > m && log_term < mx - 45.0 {
            break;
        }
    }
    a * v.ln() + mx + acc.ln()
}

/// One draw from the density `t^(a-1) e^(-s t)` truncated to `(lo, hi)` by
/// inverse CDF in log space. `hi` may be infinite when `s > 0`.
fn sample_trunc_gamma_rate<R: Rng + ?Sized>(
    a: f64,
    s: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64, SpecFunError> {
    if !(a > 0.0) || lo < 0.0 || !(hi > lo) {
        return Err(SpecFunError::Domain(format!(
            "truncated gamma needs a > 0 and 0 <= lo < hi, got a={a}, lo={lo}, hi={hi}"
        )));
    }
    let (hi_b, ln_g_hi) = if hi.is_finite() {
        (hi, log_gamma_kernel_cdf(a, s, hi))
    } else {
        if !(s > 0.0) {
            return Err(SpecFunError::Domain(
                "unbounded truncated gamma requires s > 0".into(),
            ));
        }
        let total = ln_gamma(a) - a * s.ln();
        // bracket a finite right endpoint covering the remaining mass
        let mut hb = (a / s).max(lo.max(1e-300)) * 2.0 + 16.0 / s;
        let mut lg = log_gamma_kernel_cdf(a, s, hb);
        let mut guard = 0;
        while total - lg > 1e-13 && guard < 200 {
            hb *= 2.0;
            lg = log_gamma_kernel_cdf(a, s, hb);
            guard += 1;
        }
        (hb, lg)
    };
    let ln_g_lo = log_gamma_kernel_cdf(a, s, lo);
    let u: f64 = rng.random();
    let d = if ln_g_lo == f64::NEG_INFINITY {
        0.0
    } else {
        (ln_g_lo - ln_g_hi).exp()
    };
    if 1.0 - d < 1e-14 {
        // window carries no resolvable mass: fall back to the deep-tail
        // exponential envelope (rare; requires s*lo to dominate a-1)
        return sample_tail_gamma(a, s, lo, hi_b, rng);
    }
    let target = ln_g_hi + (d + u * (1.0 - d)).ln();
    let tol = 1e-13 * (hi_b - lo) + 1e-300;
    let v = solve_increasing(
        |v| log_gamma_kernel_cdf(a, s, v) - target,
        lo,
        hi_b,
        ln_g_lo - target,
        ln_g_hi - target,
        tol,
    );
    Ok(v.clamp(lo, hi_b))
}

/// Rejection sampler for the deep right tail of `t^(a-1) e^(-s t)` on
/// `(lo, hi)` using an exponential envelope tangent at `lo`.
fn sample_tail_gamma<R: Rng + ?Sized>(
    a: f64,
    s: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64, SpecFunError> {
    let rate = s - (a - 1.0) / lo.max(1e-300);
    if !(rate > 0.0) {
        // density not decaying over the window; it is numerically a point
        return Ok(lo);
    }
    for _ in 0..10_000 {
        let u: f64 = rng.random();
        let span = 1.0 - (-rate * (hi - lo)).exp();
        let t = lo - (1.0 - u * span).ln_1p().min(0.0) / rate;
        let t = lo + (t - lo).max(0.0);
        let log_acc = (a - 1.0) * ((t / lo.max(1e-300)).ln() - (t - lo) / lo.max(1e-300));
        if rng.random::<f64>().ln() <= log_acc {
            return Ok(t.min(hi));
        }
    }
    Ok(lo)
}

/// One draw from Beta(a, b) truncated to `(lo, hi)`.
fn sample_trunc_beta<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64, SpecFunError> {
    let lo = lo.max(0.0);
    let hi = hi.min(1.0);
    if !(hi > lo) {
        return Err(SpecFunError::Domain(format!(
            "truncated beta window empty: ({lo}, {hi})"
        )));
    }
    let u: f64 = rng.random();
    if (b - 1.0).abs() < 1e-13 {
        // F(x) = x^a: invert through logs to survive large a
        let lo = lo.max(1e-300);
        let r = (a * (lo / hi).ln()).exp();
        let x = hi * ((r + u * (1.0 - r)).ln() / a).exp();
        return Ok(x.clamp(lo, hi));
    }
    if (a - 1.0).abs() < 1e-13 {
        // F(x) = 1 - (1-x)^b
        let omlo = (1.0 - lo).max(1e-300);
        let omhi = (1.0 - hi).max(0.0);
        let r = if omhi == 0.0 {
            0.0
        } else {
            (b * (omhi / omlo).ln()).exp()
        };
        let om = omlo * (((1.0 - u) + u * r).ln() / b).exp();
        return Ok((1.0 - om).clamp(lo, hi));
    }
    let flo = if lo <= 0.0 { 0.0 } else { beta_reg(a, b, lo) };
    let fhi = if hi >= 1.0 { 1.0 } else { beta_reg(a, b, hi) };
    if fhi - flo > 1e-280 {
        let target = flo + u * (fhi - flo);
        let tol = 1e-13 * (hi - lo);
        let x = solve_increasing(
            |x| beta_reg(a, b, x) - target,
            lo,
            hi,
            flo - target,
            fhi - target,
            tol,
        );
        return Ok(x.clamp(lo, hi));
    }
    // numerically massless window: griddy inverse CDF on the log density
    let log_pdf = |x: f64| (a - 1.0) * x.max(1e-300).ln() + (b - 1.0) * (1.0 - x).max(1e-300).ln();
    const GRID: usize = 256;
    let mut logw = [0.0f64; GRID];
    let mut mx = f64::NEG_INFINITY;
    for (i, lw) in logw.iter_mut().enumerate() {
        let x = lo + (i as f64 + 0.5) * (hi - lo) / GRID as f64;
        *lw = log_pdf(x);
        mx = mx.max(*lw);
    }
    let mut cum = 0.0;
    let weights: Vec<f64> = logw.iter().map(|lw| (lw - mx).exp()).collect();
    let total: f64 = weights.iter().sum();
    let t = u * total;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if cum >= t {
            let frac = 1.0 - (cum - t) / w.max(1e-300);
            return Ok(lo + (i as f64 + frac) * (hi - lo) / GRID as f64);
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// tCCH samplers
// ---------------------------------------------------------------------------

/// Exact inverse-CDF draw, valid when `b = 1` and `kappa = 1` so the density
/// collapses to `v^(a-1) e^(-s v)` on `(0, 1/nu)`.
pub fn tcch_sample_exact<R: Rng + ?Sized>(
    p: &TcchParams,
    rng: &mut R,
) -> Result<f64, SpecFunError> {
    p.validate()?;
    if (p.b - 1.0).abs() > 1e-12 || (p.kappa - 1.0).abs() > 1e-12 {
        return Err(SpecFunError::Domain(format!(
            "exact tCCH sampling requires b = 1 and kappa = 1, got b={}, kappa={}",
            p.b, p.kappa
        )));
    }
    let v = sample_trunc_gamma_rate(p.a, p.s, 0.0, p.support_upper(), rng)?;
    Ok(v.clamp(f64::MIN_POSITIVE, p.support_upper() * (1.0 - 1e-15)))
}

struct SliceCore {
    a: f64,
    b: f64,
    z: f64,
    zeta: f64,
    xi: f64,
}

impl SliceCore {
    fn from_params(p: &TcchParams) -> Result<Self, SpecFunError> {
        if p.z < 0.0 {
            return Err(SpecFunError::Domain(format!(
                "slice sampling requires z >= 0, got z={}",
                p.z
            )));
        }
        Ok(SliceCore {
            a: p.a,
            b: p.b,
            z: p.z,
            zeta: p.s / p.nu,
            xi: 1.0 / p.kappa - 1.0,
        })
    }

    /// One sweep of the auxiliary-variable sampler on `W = nu V`:
    /// uniform slices for the exponential and rational factors, a truncated
    /// gamma update for the augmentation variable, then a truncated beta
    /// update for `W` itself.
    fn sweep<R: Rng + ?Sized>(
        &self,
        w: &mut f64,
        t: &mut f64,
        rng: &mut R,
    ) -> Result<(), SpecFunError> {
        *w = w.clamp(W_EPS, 1.0 - W_EPS);
        let mut w_hi: f64 = 1.0;
        let mut w_lo: f64 = 0.0;
        let augmented = self.z > 0.0 && self.xi != 0.0;
        if augmented {
            if !t.is_finite() || *t <= 0.0 {
                let g = GammaDist::new(self.z, 1.0 / (1.0 + self.xi * *w))
                    .map_err(|e| SpecFunError::Domain(format!("gamma augmentation failed: {e}")))?;
                *t = g.sample(rng);
            }
            let e2: f64 = rng.sample(Exp1);
            let l2 = self.xi * *t * *w + e2;
            // refresh T from Gamma(z, 1) restricted by the slice on u2
            let t_new = if self.xi > 0.0 {
                sample_trunc_gamma_rate(self.z, 1.0, 0.0, l2 / (self.xi * *w), rng)?
            } else {
                let bound = l2 / (self.xi * *w); // negative xi flips the inequality
                sample_trunc_gamma_rate(self.z, 1.0, bound.max(0.0), f64::INFINITY, rng)?
            };
            *t = t_new.max(1e-300);
            let w_bound = l2 / (self.xi * *t);
            if self.xi > 0.0 {
                w_hi = w_hi.min(w_bound);
            } else {
                w_lo = w_lo.max(w_bound);
            }
        }
        if self.zeta > 0.0 {
            let e1: f64 = rng.sample(Exp1);
            w_hi = w_hi.min((self.zeta * *w + e1) / self.zeta);
        } else if self.zeta < 0.0 {
            let e1: f64 = rng.sample(Exp1);
            w_lo = w_lo.max(*w + e1 / self.zeta);
        }
        let lo = w_lo.max(0.0);
        let hi = w_hi.min(1.0);
        if hi > lo {
            *w = sample_trunc_beta(self.a, self.b, lo, hi, rng)?;
        }
        *w = w.clamp(W_EPS, 1.0 - W_EPS);
        Ok(())
    }
}

/// One slice-sampler transition targeting `tCCH(a, b, z, s, nu, kappa)` from
/// the current state `v`; returns the new `v`.
///
/// Valid for `z > 0` (the auxiliary gamma construction) and also for the
/// degenerate `z = 0` or `kappa = 1` cases, where the rational factor is
/// constant and the corresponding blocks drop out.
pub fn tcch_sample_slice<R: Rng + ?Sized>(
    p: &TcchParams,
    state: f64,
    rng: &mut R,
) -> Result<f64, SpecFunError> {
    p.validate()?;
    let core = SliceCore::from_params(p)?;
    let mut w = (p.nu * state).clamp(W_EPS, 1.0 - W_EPS);
    let mut t = f64::NAN; // drawn from its exact conditional inside the sweep
    core.sweep(&mut w, &mut t, rng)?;
    Ok(w / p.nu)
}

/// Persistent slice-sampler state (`W = nu V` plus the gamma augmentation)
/// reused across calls within one MCMC run.
#[derive(Clone, Debug)]
pub struct TcchSliceChain {
    w: f64,
    t: f64,
}

impl Default for TcchSliceChain {
    fn default() -> Self {
        TcchSliceChain {
            w: 0.5,
            t: f64::NAN,
        }
    }
}

impl TcchSliceChain {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `sweeps` transitions against the given target and returns the
    /// final `v`. The `w` state lives on (0,1) for every target, so it stays
    /// valid when the target's `nu` changes between calls.
    pub fn draw<R: Rng + ?Sized>(
        &mut self,
        p: &TcchParams,
        sweeps: usize,
        rng: &mut R,
    ) -> Result<f64, SpecFunError> {
        p.validate()?;
        let core = SliceCore::from_params(p)?;
        for _ in 0..sweeps.max(1) {
            core.sweep(&mut self.w, &mut self.t, rng)?;
        }
        Ok(self.w / p.nu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_priors(n: usize, j: usize) -> Vec<(String, TcchParams)> {
        GPriorFamily::mixtures()
            .iter()
            .map(|f| {
                let ResolvedGPrior::Mixture(p) = f.resolve(n, j).unwrap() else {
                    unreachable!()
                };
                (f.name().to_string(), p)
            })
            .collect()
    }

    #[test]
    fn pdf_integrates_to_one_for_table_priors() {
        for (name, p) in table_priors(100, 5) {
            let log_i = log_expectation(&p, &|_| 0.0, 0.0).unwrap();
            assert!(
                log_i.abs() < 1e-8,
                "{name}: pdf integral deviates from 1 by {:.2e}",
                log_i.exp() - 1.0
            );
        }
    }

    #[test]
    fn beta_degenerate_density() {
        let p = TcchParams::new(2.0, 2.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let v = tcch_log_pdf(0.5, &p).unwrap();
        assert_abs_diff_eq!(v.exp(), 1.5, epsilon = 1e-10);
        assert_eq!(tcch_log_pdf(1.5, &p).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn robust_support_matches_table() {
        let ResolvedGPrior::Mixture(p) = GPriorFamily::Robust.resolve(100, 5).unwrap() else {
            panic!("robust prior must be a mixture")
        };
        assert_abs_diff_eq!(p.support_upper(), 6.0 / 101.0, epsilon = 1e-15);
    }

    #[test]
    fn beta_prime_properness_enforced() {
        assert!(GPriorFamily::BetaPrime.resolve(10, 9).is_err());
        assert!(GPriorFamily::BetaPrime.resolve(10, 8).is_ok());
    }

    #[test]
    fn moments_trivial_cases() {
        let p = TcchParams::new(2.0, 2.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(tcch_moment(0.0, &p).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(tcch_moment(1.0, &p).unwrap(), 0.5, epsilon = 1e-11);
    }

    #[test]
    fn moments_match_quadrature() {
        for (name, p) in table_priors(200, 8) {
            for k in [1.0, 2.0, 0.5] {
                let m = tcch_moment(k, &p).unwrap();
                let q = log_expectation(&p, &|v| k * v.ln(), k).unwrap().exp();
                assert_relative_eq!(m, q, max_relative = 1e-8);
            }
            let _ = name;
        }
    }

    #[test]
    fn exact_sampler_uniform_case() {
        // a=1, s=0, nu=1 collapses to Uniform(0,1)
        let p = TcchParams::new(1.0, 1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| tcch_sample_exact(&p, &mut rng).unwrap())
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks = 0.0f64;
        for (i, v) in draws.iter().enumerate() {
            let f = v.clamp(0.0, 1.0);
            ks = ks.max((f - i as f64 / n as f64).abs());
            ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
        }
        let crit = 1.628 / (n as f64).sqrt();
        assert!(
            ks < crit,
            "KS statistic {ks:.5} above 1% critical {crit:.5}"
        );
    }

    #[test]
    fn exact_sampler_matches_moments() {
        // posterior-shaped parameters for the robust prior
        let ResolvedGPrior::Mixture(prior) = GPriorFamily::Robust.resolve(500, 10).unwrap() else {
            panic!()
        };
        let p = prior.posterior(10, 50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000usize;
        let draws: Vec<f64> = (0..n)
            .map(|_| tcch_sample_exact(&p, &mut rng).unwrap())
            .collect();
        let up = p.support_upper();
        assert!(draws.iter().all(|&v| v > 0.0 && v < up));
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        let var: f64 = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let m1 = tcch_moment(1.0, &p).unwrap();
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - m1).abs() < 4.0 * se,
            "mean {mean:.6e} vs analytic {m1:.6e} (4se = {:.2e})",
            4.0 * se
        );
    }

    #[test]
    fn slice_sampler_stays_in_support() {
        let ResolvedGPrior::Mixture(prior) = GPriorFamily::Intrinsic.resolve(200, 10).unwrap()
        else {
            panic!()
        };
        let p = prior.posterior(10, 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v = tcch_moment(1.0, &p).unwrap();
        for _ in 0..1000 {
            v = tcch_sample_slice(&p, v, &mut rng).unwrap();
            assert!(v > 0.0 && v < p.support_upper());
        }
    }

    #[test]
    fn slice_sampler_matches_exact_when_kappa_one() {
        // z > 0 but kappa = 1 makes the rational factor constant, so the
        // stationary law matches the exact truncated-gamma sampler
        let ResolvedGPrior::Mixture(prior) = GPriorFamily::Robust.resolve(300, 6).unwrap() else {
            panic!()
        };
        let p = prior.posterior(6, 25.0);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 100_000usize;
        let mut chain = TcchSliceChain::new();
        let mut a: Vec<f64> = Vec::with_capacity(n);
        for _ in 0..n {
            a.push(chain.draw(&p, 2, &mut rng).unwrap());
        }
        let mut b: Vec<f64> = (0..n)
            .map(|_| tcch_sample_exact(&p, &mut rng).unwrap())
            .collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        // two-sample KS distance by merging the sorted samples
        let (mut i, mut j, mut ks) = (0usize, 0usize, 0.0f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            ks = ks.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        // the slice chain is autocorrelated; use a conservative critical value
        // for the effective size of the chain side
        let ess = crate::samplers::ess::effective_sample_size(&a_unsorted_proxy(&p));
        let eff = ess.min(n as f64).max(500.0);
        let crit = 1.628 * ((eff + n as f64) / (eff * n as f64)).sqrt();
        assert!(ks < crit, "two-sample KS {ks:.5} above {crit:.5}");
    }

    // a fresh chain trace used only to estimate autocorrelation scale
    fn a_unsorted_proxy(p: &TcchParams) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut chain = TcchSliceChain::new();
        (0..20_000)
            .map(|_| chain.draw(p, 2, &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn slice_chain_matches_moments() {
        let ResolvedGPrior::Mixture(prior) = GPriorFamily::Intrinsic.resolve(200, 10).unwrap()
        else {
            panic!()
        };
        let p = prior.posterior(10, 40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut chain = TcchSliceChain::new();
        let n = 30_000usize;
        let draws: Vec<f64> = (0..n)
            .map(|_| chain.draw(&p, 10, &mut rng).unwrap())
            .collect();
        let m1 = tcch_moment(1.0, &p).unwrap();
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        let var: f64 = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let ess = crate::samplers::ess::effective_sample_size(&draws).max(100.0);
        let se = (var / ess).sqrt();
        assert!(
            (mean - m1).abs() < 4.0 * se,
            "slice mean {mean:.6e} vs analytic {m1:.6e} (4se = {:.2e}, ess = {ess:.0})",
            4.0 * se
        );
    }

    #[test]
    fn slice_rejects_negative_z() {
        let p = TcchParams {
            a: 1.0,
            b: 1.0,
            z: -0.5,
            s: 0.0,
            nu: 1.0,
            kappa: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(tcch_sample_slice(&p, 0.5, &mut rng).is_err());
    }

    #[test]
    fn exact_sampler_rejects_general_params() {
        let p = TcchParams::new(1.0, 2.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(tcch_sample_exact(&p, &mut rng).is_err());
    }

    #[test]
    fn negative_s_exact_sampling_in_log_space() {
        // exponential tilt with growing density toward the support edge
        let p = TcchParams::new(1.5, 1.0, 0.0, -30.0, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 50_000usize;
        let draws: Vec<f64> = (0..n)
            .map(|_| tcch_sample_exact(&p, &mut rng).unwrap())
            .collect();
        assert!(draws.iter().all(|&v| v > 0.0 && v < 0.5));
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        let m1 = tcch_moment(1.0, &p).unwrap();
        let var: f64 = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - m1).abs() < 4.0 * (var / n as f64).sqrt());
    }
}
