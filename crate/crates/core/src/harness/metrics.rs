//! RMSE and pointwise credible-band coverage against a known truth.

use crate::samplers::FunctionalSummary;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(
        "truth grid for covariate {covariate} has {truth} points but the summary has {summary}"
    )]
    GridMismatch {
        covariate: usize,
        truth: usize,
        summary: usize,
    },
}

/// Per-replicate, per-covariate evaluation metrics.
#[derive(Clone, Debug)]
pub struct MetricsRow {
    pub replicate: usize,
    pub covariate: usize,
    pub prior: String,
    pub rmse: f64,
    /// Per-gridpoint indicator that the 95% band contains the truth.
    pub coverage: Vec<u8>,
    pub ess: f64,
    pub runtime_seconds: f64,
}

impl MetricsRow {
    pub fn coverage_rate(&self) -> f64 {
        if self.coverage.is_empty() {
            return f64::NAN;
        }
        self.coverage.iter().map(|&c| c as f64).sum::<f64>() / self.coverage.len() as f64
    }
}

/// Computes RMSE of the posterior mean and the per-gridpoint coverage
/// indicators against the centered truth (one truth vector per covariate,
/// evaluated on the same grids as the summary).
pub fn rmse_and_coverage(
    summary: &FunctionalSummary,
    truth: &[Vec<f64>],
    replicate: usize,
    prior: &str,
    ess: f64,
    runtime_seconds: f64,
) -> Result<Vec<MetricsRow>, MetricsError> {
    let mut rows = Vec::with_capacity(summary.per_covariate.len());
    for (j, cov) in summary.per_covariate.iter().enumerate() {
        let t = &truth[j];
        if t.len() != cov.grid.len() {
            return Err(MetricsError::GridMismatch {
                covariate: j,
                truth: t.len(),
                summary: cov.grid.len(),
            });
        }
        let mut sq = 0.0;
        let mut coverage = Vec::with_capacity(t.len());
        for (gi, truth) in t.iter().enumerate() {
            let d = cov.mean[gi] - truth;
            sq += d * d;
            let inside = cov.lower[gi] <= *truth && *truth <= cov.upper[gi];
            coverage.push(u8::from(inside));
        }
        rows.push(MetricsRow {
            replicate,
            covariate: j,
            prior: prior.to_string(),
            rmse: (sq / t.len() as f64).sqrt(),
            coverage,
            ess,
            runtime_seconds,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::CovariateSummary;

    fn summary_one(mean: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> FunctionalSummary {
        let grid = (0..mean.len()).map(|i| i as f64).collect();
        FunctionalSummary {
            per_covariate: vec![CovariateSummary {
                grid,
                mean,
                lower,
                upper,
            }],
        }
    }

    #[test]
    fn degenerate_posterior_has_zero_rmse_full_coverage() {
        let truth = vec![vec![0.5, -0.25, 1.0]];
        let s = summary_one(
            truth[0].clone(),
            truth[0].iter().map(|v| v - 0.1).collect(),
            truth[0].iter().map(|v| v + 0.1).collect(),
        );
        let rows = rmse_and_coverage(&s, &truth, 0, "robust", 100.0, 1.0).unwrap();
        assert_eq!(rows[0].rmse, 0.0);
        assert_eq!(rows[0].coverage_rate(), 1.0);
    }

    #[test]
    fn constant_shift_bounds_rmse() {
        let truth = vec![vec![0.0; 10]];
        let c = 0.7;
        let s = summary_one(vec![c; 10], vec![c - 0.1; 10], vec![c + 0.1; 10]);
        let rows = rmse_and_coverage(&s, &truth, 0, "robust", 100.0, 1.0).unwrap();
        assert!(rows[0].rmse >= c - 1e-12);
        assert_eq!(rows[0].coverage_rate(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let truth = vec![vec![0.0; 4]];
        let s = summary_one(vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]);
        assert!(rmse_and_coverage(&s, &truth, 0, "x", 1.0, 1.0).is_err());
    }
}
