//! Effective sample size via the initial-monotone-positive-sequence
//! autocorrelation estimator.

/// ESS of a scalar trace. A constant trace returns the trace length by
/// convention; traces shorter than 10 are returned as their own length.
pub fn effective_sample_size(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 10 {
        return n as f64;
    }
    let nf = n as f64;
    let mx = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mn = trace.iter().copied().fold(f64::INFINITY, f64::min);
    if mx == mn {
        return nf;
    }
    let mean = trace.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let gamma = |k: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..(n - k) {
            s += centered[i] * centered[i + k];
        }
        s / nf
    };
    let g0 = gamma(0);
    if g0 <= 0.0 || !g0.is_finite() {
        return nf;
    }
    // pair the autocovariances; keep while positive and monotone nonincreasing
    let mut sum_pairs = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0usize;
    while 2 * m + 1 < n - 1 {
        let pair = gamma(2 * m) + gamma(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let capped = pair.min(prev);
        sum_pairs += capped;
        prev = capped;
        m += 1;
        if m > n / 2 {
            break;
        }
    }
    let sigma2 = -g0 + 2.0 * sum_pairs;
    if sigma2 <= 0.0 {
        return nf;
    }
    (nf * g0 / sigma2).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn iid_trace_ess_near_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 10_000;
        let trace: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let ess = effective_sample_size(&trace);
        let ratio = ess / n as f64;
        assert!((0.8..=1.2).contains(&ratio), "iid ESS/N = {ratio:.3}");
    }

    #[test]
    fn ar1_trace_matches_analytic_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let rho: f64 = 0.9;
        let mut x = 0.0;
        let scale = (1.0 - rho * rho).sqrt();
        let trace: Vec<f64> = (0..n)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                x = rho * x + scale * e;
                x
            })
            .collect();
        let ess = effective_sample_size(&trace);
        let expect = (1.0 - rho) / (1.0 + rho);
        let ratio = ess / n as f64;
        assert!(
            (ratio - expect).abs() < 0.3 * expect,
            "AR(1) ESS/N = {ratio:.4}, expected about {expect:.4}"
        );
    }

    #[test]
    fn constant_trace_returns_length() {
        let trace = vec![3.2; 500];
        assert_eq!(effective_sample_size(&trace), 500.0);
    }
}
