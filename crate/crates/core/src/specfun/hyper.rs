//! Log-domain hypergeometric functions via their Euler integral
//! representations.
//!
//! All functions here integrate a kernel of the form
//! `u^(α-1) (1-u)^(γ-α-1) * [rational factors] * exp(x u)` over (0,1) with the
//! maximum of the log-integrand factored out, so results stay finite for
//! parameters up to the 1e5 scale. Integrable endpoint singularities (α<1 or
//! γ-α<1) are removed by power substitutions `u = t^m` before quadrature.

use super::quad::{log_integrate_pieces, LogPiece, QuadError};
use super::SpecFunError;
use statrs::function::beta::ln_beta;

const DEFAULT_REL_TOL: f64 = 1e-12;
const MAX_SEGMENTS: usize = 4000;

/// Substitution exponent removing a `u^(alpha-1)` endpoint singularity.
fn subst_exponent(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        1.0
    } else {
        ((1.0 / alpha).ceil() + 1.0).clamp(2.0, 64.0)
    }
}

/// Integrates `exp(logf(u, 1-u))` over (0,1) where the integrand behaves like
/// `u^(alpha_left-1)` at 0 and `(1-u)^(alpha_right-1)` at 1. Returns the log
/// of the integral.
pub(crate) fn log_integral_unit(
    alpha_left: f64,
    alpha_right: f64,
    logf: &dyn Fn(f64, f64) -> f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    let m_l = subst_exponent(alpha_left);
    let m_r = subst_exponent(alpha_right);

    let left_direct = |u: f64| logf(u, 1.0 - u);
    let left_subst = |t: f64| {
        let u = t.powf(m_l);
        logf(u, 1.0 - u) + m_l.ln() + (m_l - 1.0) * t.ln()
    };
    let right_direct = |u: f64| logf(u, 1.0 - u);
    let right_subst = |t: f64| {
        let omu = t.powf(m_r);
        logf(1.0 - omu, omu) + m_r.ln() + (m_r - 1.0) * t.ln()
    };

    let mut pieces: Vec<LogPiece<'_>> = Vec::with_capacity(2);
    if m_l == 1.0 {
        pieces.push(LogPiece {
            lo: 0.0,
            hi: 0.5,
            logf: &left_direct,
        });
    } else {
        pieces.push(LogPiece {
            lo: 0.0,
            hi: 0.5f64.powf(1.0 / m_l),
            logf: &left_subst,
        });
    }
    if m_r == 1.0 {
        pieces.push(LogPiece {
            lo: 0.5,
            hi: 1.0,
            logf: &right_direct,
        });
    } else {
        pieces.push(LogPiece {
            lo: 0.0,
            hi: 0.5f64.powf(1.0 / m_r),
            logf: &right_subst,
        });
    }
    log_integrate_pieces(&pieces, rel_tol, MAX_SEGMENTS)
}

fn check_finite(name: &str, v: f64) -> Result<(), SpecFunError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SpecFunError::Domain(format!("{name} = {v} is not finite")))
    }
}

/// Log of the confluent hypergeometric function of two variables,
/// `Phi_1(alpha, beta, gamma, x, y)`.
///
/// Requires `gamma > alpha > 0`, `beta >= 0` and `y < 1`. `beta = 0` is
/// accepted as the 1F1 degenerate case (the `(1-yu)^-beta` factor drops out).
pub fn log_phi1(alpha: f64, beta: f64, gamma: f64, x: f64, y: f64) -> Result<f64, SpecFunError> {
    log_phi1_tol(alpha, beta, gamma, x, y, DEFAULT_REL_TOL)
}

/// `log_phi1` with an explicit quadrature tolerance.
pub fn log_phi1_tol(
    alpha: f64,
    beta: f64,
    gamma: f64,
    x: f64,
    y: f64,
    rel_tol: f64,
) -> Result<f64, SpecFunError> {
    for (name, v) in [
        ("alpha", alpha),
        ("beta", beta),
        ("gamma", gamma),
        ("x", x),
        ("y", y),
    ] {
        check_finite(name, v)?;
    }
    if !(alpha > 0.0 && gamma > alpha) {
        return Err(SpecFunError::Domain(format!(
            "Phi1 requires gamma > alpha > 0, got alpha={alpha}, gamma={gamma}"
        )));
    }
    if beta < 0.0 {
        return Err(SpecFunError::Domain(format!(
            "Phi1 requires beta >= 0, got beta={beta}"
        )));
    }
    if beta > 0.0 && y >= 1.0 {
        return Err(SpecFunError::Domain(format!(
            "Phi1 requires y < 1, got y={y}"
        )));
    }
    let logf = move |u: f64, omu: f64| {
        let mut l = (alpha - 1.0) * u.ln() + (gamma - alpha - 1.0) * omu.ln() + x * u;
        if beta != 0.0 {
            // 1 - y*u computed through 1-u to keep precision when y -> 1
            l -= beta * ((1.0 - y) + y * omu).ln();
        }
        l
    };
    let li = log_integral_unit(alpha, gamma - alpha, &logf, rel_tol)?;
    Ok(li - ln_beta(alpha, gamma - alpha))
}

/// Log of Kummer's confluent hypergeometric function `1F1(a; c; x)` for
/// `c > a > 0`.
pub fn log_hyp1f1(a: f64, c: f64, x: f64) -> Result<f64, SpecFunError> {
    log_phi1(a, 0.0, c, x, 0.0)
}

/// Log of the Gauss hypergeometric function `2F1(b, a; c; y)` for
/// `c > a > 0`, `y < 1`.
pub fn log_hyp2f1(b: f64, a: f64, c: f64, y: f64) -> Result<f64, SpecFunError> {
    log_phi1(a, b, c, 0.0, y)
}

/// Log of the first Appell hypergeometric function `F1(a; b1, b2; c; x, y)`
/// for `c > a > 0`, `x < 1`, `y < 1`.
pub fn log_appell_f1(
    a: f64,
    b1: f64,
    b2: f64,
    c: f64,
    x: f64,
    y: f64,
) -> Result<f64, SpecFunError> {
    for (name, v) in [
        ("a", a),
        ("b1", b1),
        ("b2", b2),
        ("c", c),
        ("x", x),
        ("y", y),
    ] {
        check_finite(name, v)?;
    }
    if !(a > 0.0 && c > a) {
        return Err(SpecFunError::Domain(format!(
            "F1 requires c > a > 0, got a={a}, c={c}"
        )));
    }
    if (b1 != 0.0 && x >= 1.0) || (b2 != 0.0 && y >= 1.0) {
        return Err(SpecFunError::Domain(format!(
            "F1 requires x < 1 and y < 1, got x={x}, y={y}"
        )));
    }
    let logf = move |u: f64, omu: f64| {
        let mut l = (a - 1.0) * u.ln() + (c - a - 1.0) * omu.ln();
        if b1 != 0.0 {
            l -= b1 * ((1.0 - x) + x * omu).ln();
        }
        if b2 != 0.0 {
            l -= b2 * ((1.0 - y) + y * omu).ln();
        }
        l
    };
    let li = log_integral_unit(a, c - a, &logf, DEFAULT_REL_TOL)?;
    Ok(li - ln_beta(a, c - a))
}
