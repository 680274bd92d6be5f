//! Adaptive Gauss-Kronrod quadrature with log-domain support.
//!
//! The hypergeometric integrands in this crate span hundreds to thousands of
//! nats, so `log_integrate_pieces` first locates the maximum of the
//! log-integrand by scanning and local refinement, factors it out, and only
//! then integrates the rescaled integrand with the 15-point Kronrod rule.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("invalid integration bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("integrand produced a non-finite value")]
    NonFinite,
    #[error(
        "quadrature did not converge: relative error {achieved:.3e} after {segments} segments"
    )]
    NonConvergence { achieved: f64, segments: usize },
}

// 15-point Kronrod nodes and weights with the embedded 7-point Gauss rule,
// kept at their full published precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod evaluation on `[a, b]`; returns `(value, error_estimate)`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_kronrod = f_center * WGK[7];
    let mut res_gauss = f_center * WG[3];
    let mut res_abs = res_kronrod.abs();
    let mut fv = [0.0f64; 14];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[j + 7] = f2;
        res_kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[j + 7] - mean).abs());
    }
    let raw_err = ((res_kronrod - res_gauss) * half).abs();
    let res_asc = res_asc * half.abs();
    let mut err = raw_err;
    if res_asc != 0.0 && raw_err != 0.0 {
        err = res_asc * (200.0 * raw_err / res_asc).powf(1.5).min(1.0);
    }
    let res_abs = res_abs * half.abs();
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (res_kronrod * half, err)
}

#[derive(Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

/// Adaptive integration of `f` over `[lo, hi]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<f64, QuadError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(QuadError::InvalidBounds { lo, hi });
    }
    let (v, e) = gk15(&f, lo, hi);
    let mut segments = vec![Segment {
        lo,
        hi,
        value: v,
        error: e,
    }];
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(QuadError::NonFinite);
        }
        let target = rel_tol * total.abs().max(f64::MIN_POSITIVE);
        if err <= target {
            return Ok(total);
        }
        if segments.len() >= max_segments {
            let achieved = err / total.abs().max(f64::MIN_POSITIVE);
            if achieved <= 1e-7 {
                return Ok(total);
            }
            return Err(QuadError::NonConvergence {
                achieved,
                segments: segments.len(),
            });
        }
        // split the segment with the largest error estimate
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.partial_cmp(&b.1.error).unwrap())
            .map(|(i, s)| (i, s.error))
            .unwrap();
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.lo + s.hi);
        if mid <= s.lo || mid >= s.hi {
            // interval no longer splittable at f64 resolution
            segments.push(s);
            let achieved = err / total.abs().max(f64::MIN_POSITIVE);
            if achieved <= 1e-7 {
                return Ok(total);
            }
            return Err(QuadError::NonConvergence {
                achieved,
                segments: segments.len(),
            });
        }
        let (v1, e1) = gk15(&f, s.lo, mid);
        let (v2, e2) = gk15(&f, mid, s.hi);
        segments.push(Segment {
            lo: s.lo,
            hi: mid,
            value: v1,
            error: e1,
        });
        segments.push(Segment {
            lo: mid,
            hi: s.hi,
            value: v2,
            error: e2,
        });
    }
}

/// A sub-interval with its own log-integrand (already transformed so the
/// integrand is bounded above on the closed interval).
pub struct LogPiece<'a> {
    pub lo: f64,
    pub hi: f64,
    pub logf: &'a dyn Fn(f64) -> f64,
}

/// Locates the maximum of `logf` on `[lo, hi]` by a coarse scan followed by
/// shrinking local re-scans.
fn scan_max(piece: &LogPiece<'_>) -> f64 {
    const COARSE: usize = 129;
    const LOCAL: usize = 33;
    let span = piece.hi - piece.lo;
    let mut best_x = piece.lo + 0.5 * span;
    let mut best = f64::NEG_INFINITY;
    for i in 0..COARSE {
        let x = piece.lo + (i as f64 + 0.5) * span / COARSE as f64;
        let v = (piece.logf)(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let mut h = span / COARSE as f64;
    for _ in 0..4 {
        let lo = (best_x - h).max(piece.lo);
        let hi = (best_x + h).min(piece.hi);
        let w = hi - lo;
        for i in 0..LOCAL {
            let x = lo + (i as f64 + 0.5) * w / LOCAL as f64;
            let v = (piece.logf)(x);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        h /= 12.0;
    }
    best
}

/// Integrates `sum_i exp(logf_i)` over the pieces and returns the log of the
/// total, factoring out the global maximum of the log-integrands first.
pub fn log_integrate_pieces(
    pieces: &[LogPiece<'_>],
    rel_tol: f64,
    max_segments: usize,
) -> Result<f64, QuadError> {
    let mut m = f64::NEG_INFINITY;
    for p in pieces {
        if !(p.lo < p.hi) {
            return Err(QuadError::InvalidBounds { lo: p.lo, hi: p.hi });
        }
        m = m.max(scan_max(p));
    }
    if !m.is_finite() {
        // integrand is zero (or invalid) everywhere we looked
        return if m == f64::NEG_INFINITY {
            Ok(f64::NEG_INFINITY)
        } else {
            Err(QuadError::NonFinite)
        };
    }
    let mut total = 0.0;
    for p in pieces {
        let g = |x: f64| {
            let l = (p.logf)(x) - m;
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                l.exp()
            }
        };
        total += integrate(g, p.lo, p.hi, rel_tol, max_segments)?;
    }
    if total <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(m + total.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_polynomial_exactly() {
        // GK15 is exact for this degree even without splitting
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12, 100).unwrap();
        assert_abs_diff_eq!(v, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn integrates_narrow_peak() {
        // N(0.3, 1e-3) density integrates to ~1 over [0,1]
        let s = 1e-3;
        let f = |x: f64| {
            (-(x - 0.3f64).powi(2) / (2.0 * s * s)).exp()
                / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let v = integrate(f, 0.0, 1.0, 1e-11, 2000).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn log_integration_handles_huge_scale() {
        // integral of exp(c) * x over (0,1) = exp(c)/2 for c far beyond f64 range
        let c = 5000.0;
        let logf = move |x: f64| c + x.ln();
        let piece = LogPiece {
            lo: 0.0,
            hi: 1.0,
            logf: &logf,
        };
        let v = log_integrate_pieces(&[piece], 1e-12, 2000).unwrap();
        assert_abs_diff_eq!(v, c - std::f64::consts::LN_2, epsilon = 1e-9);
    }

    #[test]
    fn log_integration_of_sharp_exponential() {
        // int_0^1 exp(k*x) dx = (exp(k)-1)/k; log = k + ln((1-exp(-k))/k)
        let k = 1e5;
        let logf = move |x: f64| k * x;
        let piece = LogPiece {
            lo: 0.0,
            hi: 1.0,
            logf: &logf,
        };
        let v = log_integrate_pieces(&[piece], 1e-12, 4000).unwrap();
        assert_abs_diff_eq!(v, k - k.ln(), epsilon = 1e-8);
    }

    #[test]
    fn rejects_invalid_bounds() {
        assert!(matches!(
            integrate(|x| x, 1.0, 0.0, 1e-10, 10),
            Err(QuadError::InvalidBounds { .. })
        ));
    }
}
