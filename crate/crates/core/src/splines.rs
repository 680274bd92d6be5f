//! Natural cubic spline bases built for incremental model-space moves.
//!
//! Each basis term depends on a single interior knot (plus the fixed
//! boundary pair), so inserting or deleting a knot adds or removes exactly
//! one column without touching the others. Columns are centered at the
//! design points so every fitted component sums to zero over the sample.

use ndarray::{Array2, ArrayView1};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("design matrix is empty")]
    EmptyDesign,
    #[error("covariate index {0} out of range")]
    CovariateOutOfRange(usize),
    #[error("knot {t} outside the open interval ({lo}, {hi}) for covariate {j}")]
    KnotOutOfRange { j: usize, t: f64, lo: f64, hi: f64 },
    #[error("knot {t} collides with an existing knot of covariate {j}")]
    DuplicateKnot { j: usize, t: f64 },
    #[error("knot {t} not present for covariate {j}")]
    KnotNotFound { j: usize, t: f64 },
    #[error("covariate {0} is linear-only but has interior knots")]
    LinearOnlyViolated(usize),
    #[error("boundary knots must equal the observed min/max for covariate {0}")]
    BoundaryMismatch(usize),
    #[error("need at least {needed} unique design values, got {got}")]
    TooFewUniqueValues { needed: usize, got: usize },
    #[error("covariate {0} is constant in the design")]
    DegenerateCovariate(usize),
}

fn pos_cube(x: f64) -> f64 {
    if x > 0.0 {
        x * x * x
    } else {
        0.0
    }
}

/// Unchecked natural cubic spline basis term for interior knot `t` with
/// boundary knots `(lo, hi)`. Linear outside `[lo, hi]` by construction.
pub(crate) fn ncs_value(u: f64, lo: f64, hi: f64, t: f64) -> f64 {
    (pos_cube(u - t) - pos_cube(u - hi)) / (hi - t)
        - (pos_cube(u - lo) - pos_cube(u - hi)) / (hi - lo)
}

/// Evaluates the natural cubic spline basis term `N(u; t_l, t_u, t)`,
/// rejecting knots outside the open boundary interval.
pub fn eval_natural_basis(u: f64, t_l: f64, t_u: f64, t: f64) -> Result<f64, SplineError> {
    if !(t_l < t && t < t_u) {
        return Err(SplineError::KnotOutOfRange {
            j: 0,
            t,
            lo: t_l,
            hi: t_u,
        });
    }
    Ok(ncs_value(u, t_l, t_u, t))
}

/// Interior knots of coordinate `k` of a quantile rule: `Q(k/(m+1))` over the
/// sorted unique design values `x`, using the lower-order-statistic inverse
/// empirical CDF (no interpolation), so knots always coincide with observed
/// values.
pub fn quantile_knots(x: &[f64], m: usize) -> Result<Vec<f64>, SplineError> {
    let n = x.len();
    if n < m + 2 {
        return Err(SplineError::TooFewUniqueValues {
            needed: m + 2,
            got: n,
        });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(m);
    for k in 1..=m {
        // ceil(k*n/(m+1)) in exact integer arithmetic
        let idx = (k * n + m) / (m + 1);
        out.push(x[idx - 1]);
    }
    Ok(out)
}

/// Sorted unique values of a design column.
pub fn unique_sorted(x: ArrayView1<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// Boundary and interior knots for one covariate.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateKnots {
    pub boundary_low: f64,
    pub boundary_high: f64,
    pub interior: Vec<f64>,
    pub linear_only: bool,
}

impl CovariateKnots {
    fn validate(&self, j: usize) -> Result<(), SplineError> {
        if self.linear_only && !self.interior.is_empty() {
            return Err(SplineError::LinearOnlyViolated(j));
        }
        let mut prev = self.boundary_low;
        for &t in &self.interior {
            if !(t > prev) || !(t < self.boundary_high) {
                return Err(SplineError::KnotOutOfRange {
                    j,
                    t,
                    lo: self.boundary_low,
                    hi: self.boundary_high,
                });
            }
            prev = t;
        }
        Ok(())
    }

    fn collision_tol(&self) -> f64 {
        1e-12 * (self.boundary_high - self.boundary_low)
    }
}

/// The model index: per-covariate boundary knots and sorted interior knots.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotState {
    covariates: Vec<CovariateKnots>,
}

impl KnotState {
    /// Empty-interior knot state with boundary knots frozen at the observed
    /// min/max of each design column.
    pub fn from_design(design: &Array2<f64>) -> Result<Self, SplineError> {
        if design.nrows() == 0 || design.ncols() == 0 {
            return Err(SplineError::EmptyDesign);
        }
        let mut covariates = Vec::with_capacity(design.ncols());
        for j in 0..design.ncols() {
            let col = design.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(lo < hi) {
                return Err(SplineError::DegenerateCovariate(j));
            }
            covariates.push(CovariateKnots {
                boundary_low: lo,
                boundary_high: hi,
                interior: Vec::new(),
                linear_only: false,
            });
        }
        Ok(KnotState { covariates })
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn covariate(&self, j: usize) -> &CovariateKnots {
        &self.covariates[j]
    }

    pub fn covariates(&self) -> &[CovariateKnots] {
        &self.covariates
    }

    pub fn counts(&self) -> Vec<usize> {
        self.covariates.iter().map(|c| c.interior.len()).collect()
    }

    /// `J = p + sum_j |xi_j|`.
    pub fn total_columns(&self) -> usize {
        self.covariates.len()
            + self
                .covariates
                .iter()
                .map(|c| c.interior.len())
                .sum::<usize>()
    }

    pub fn set_linear_only(&mut self, j: usize, flag: bool) -> Result<(), SplineError> {
        if j >= self.covariates.len() {
            return Err(SplineError::CovariateOutOfRange(j));
        }
        self.covariates[j].linear_only = flag;
        self.covariates[j].validate(j)
    }

    /// Replaces the interior knots of covariate `j` (must be sorted strictly
    /// inside the boundaries).
    pub fn set_interior(&mut self, j: usize, interior: Vec<f64>) -> Result<(), SplineError> {
        if j >= self.covariates.len() {
            return Err(SplineError::CovariateOutOfRange(j));
        }
        let mut c = self.covariates[j].clone();
        c.interior = interior;
        c.validate(j)?;
        self.covariates[j] = c;
        Ok(())
    }

    /// New state with `t` inserted into covariate `j`; rejects knots colliding
    /// (within a relative tolerance) with existing knots or boundaries.
    pub fn insert(&self, j: usize, t: f64) -> Result<(Self, usize), SplineError> {
        if j >= self.covariates.len() {
            return Err(SplineError::CovariateOutOfRange(j));
        }
        let c = &self.covariates[j];
        if c.linear_only {
            return Err(SplineError::LinearOnlyViolated(j));
        }
        let tol = c.collision_tol();
        if !(t > c.boundary_low + tol && t < c.boundary_high - tol) {
            return Err(SplineError::KnotOutOfRange {
                j,
                t,
                lo: c.boundary_low,
                hi: c.boundary_high,
            });
        }
        if c.interior.iter().any(|&k| (k - t).abs() <= tol) {
            return Err(SplineError::DuplicateKnot { j, t });
        }
        let pos = c.interior.partition_point(|&k| k < t);
        let mut next = self.clone();
        next.covariates[j].interior.insert(pos, t);
        Ok((next, pos))
    }

    /// New state with the exact knot `t` removed from covariate `j`.
    pub fn remove(&self, j: usize, t: f64) -> Result<(Self, usize), SplineError> {
        if j >= self.covariates.len() {
            return Err(SplineError::CovariateOutOfRange(j));
        }
        let pos = self.covariates[j]
            .interior
            .iter()
            .position(|&k| k == t)
            .ok_or(SplineError::KnotNotFound { j, t })?;
        let mut next = self.clone();
        next.covariates[j].interior.remove(pos);
        Ok((next, pos))
    }

    pub fn validate(&self) -> Result<(), SplineError> {
        for (j, c) in self.covariates.iter().enumerate() {
            c.validate(j)?;
        }
        Ok(())
    }
}

/// What a basis column represents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ColumnKind {
    Linear,
    Knot(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnInfo {
    pub covariate: usize,
    pub kind: ColumnKind,
}

/// Centered design matrix for a knot state, with an explicit knot-to-column
/// map so model moves edit single columns.
///
/// Immutable after construction; edits return new values.
#[derive(Clone, Debug)]
pub struct BasisMatrix {
    design: Arc<Array2<f64>>,
    knots: KnotState,
    values: Array2<f64>,
    column_map: Vec<ColumnInfo>,
    centering_offsets: Vec<f64>,
}

fn column_mean(col: &[f64]) -> f64 {
    col.iter().sum::<f64>() / col.len() as f64
}

/// Builds the centered basis matrix for `knots` over `design`. Boundary knots
/// must equal the observed min/max of each column (they are frozen at fit
/// time and never proposed by samplers).
pub fn build_basis(
    design: Arc<Array2<f64>>,
    knots: &KnotState,
) -> Result<BasisMatrix, SplineError> {
    let n = design.nrows();
    let p = design.ncols();
    if n == 0 || p == 0 {
        return Err(SplineError::EmptyDesign);
    }
    if knots.n_covariates() != p {
        return Err(SplineError::CovariateOutOfRange(knots.n_covariates()));
    }
    knots.validate()?;
    for j in 0..p {
        let col = design.column(j);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let c = knots.covariate(j);
        if c.boundary_low != lo || c.boundary_high != hi {
            return Err(SplineError::BoundaryMismatch(j));
        }
        // strict ordering also guards duplicates
        let mut prev = f64::NEG_INFINITY;
        for &t in &c.interior {
            if t <= prev {
                return Err(SplineError::DuplicateKnot { j, t });
            }
            prev = t;
        }
    }
    let j_total = knots.total_columns();
    let mut values = Array2::<f64>::zeros((n, j_total));
    let mut column_map = Vec::with_capacity(j_total);
    let mut centering_offsets = Vec::with_capacity(j_total);
    let mut col_idx = 0usize;
    let mut raw = vec![0.0f64; n];
    for j in 0..p {
        let c = knots.covariate(j);
        let x = design.column(j);
        // linear term first
        for (i, xi) in x.iter().enumerate() {
            raw[i] = *xi;
        }
        let off = column_mean(&raw);
        for i in 0..n {
            values[[i, col_idx]] = raw[i] - off;
        }
        column_map.push(ColumnInfo {
            covariate: j,
            kind: ColumnKind::Linear,
        });
        centering_offsets.push(off);
        col_idx += 1;
        for &t in &c.interior {
            for (i, xi) in x.iter().enumerate() {
                raw[i] = ncs_value(*xi, c.boundary_low, c.boundary_high, t);
            }
            let off = column_mean(&raw);
            for i in 0..n {
                values[[i, col_idx]] = raw[i] - off;
            }
            column_map.push(ColumnInfo {
                covariate: j,
                kind: ColumnKind::Knot(t),
            });
            centering_offsets.push(off);
            col_idx += 1;
        }
    }
    Ok(BasisMatrix {
        design,
        knots: knots.clone(),
        values,
        column_map,
        centering_offsets,
    })
}

impl BasisMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn knots(&self) -> &KnotState {
        &self.knots
    }

    pub fn design(&self) -> &Arc<Array2<f64>> {
        &self.design
    }

    pub fn column_map(&self) -> &[ColumnInfo] {
        &self.column_map
    }

    pub fn centering_offsets(&self) -> &[f64] {
        &self.centering_offsets
    }

    /// Column range of covariate `j`'s block (linear term first, then knot
    /// terms in knot order).
    pub fn column_range(&self, j: usize) -> std::ops::Range<usize> {
        let start = self
            .column_map
            .iter()
            .position(|c| c.covariate == j)
            .unwrap_or(self.column_map.len());
        let end = start
            + self.column_map[start..]
                .iter()
                .take_while(|c| c.covariate == j)
                .count();
        start..end
    }

    /// New basis with knot `t` inserted into covariate `j`. Pre-existing
    /// columns are copied bit-identically; exactly one column is added at its
    /// knot-order position.
    pub fn insert_knot(&self, j: usize, t: f64) -> Result<BasisMatrix, SplineError> {
        let (knots, pos) = self.knots.insert(j, t)?;
        let c = self.knots.covariate(j);
        let n = self.n();
        let insert_at = self.column_range(j).start + 1 + pos;
        let mut values = Array2::<f64>::zeros((n, self.ncols() + 1));
        let x = self.design.column(j);
        let mut raw = vec![0.0f64; n];
        for (i, xi) in x.iter().enumerate() {
            raw[i] = ncs_value(*xi, c.boundary_low, c.boundary_high, t);
        }
        let off = column_mean(&raw);
        for col in 0..insert_at {
            values.column_mut(col).assign(&self.values.column(col));
        }
        for i in 0..n {
            values[[i, insert_at]] = raw[i] - off;
        }
        for col in insert_at..self.ncols() {
            values.column_mut(col + 1).assign(&self.values.column(col));
        }
        let mut column_map = self.column_map.clone();
        column_map.insert(
            insert_at,
            ColumnInfo {
                covariate: j,
                kind: ColumnKind::Knot(t),
            },
        );
        let mut centering_offsets = self.centering_offsets.clone();
        centering_offsets.insert(insert_at, off);
        Ok(BasisMatrix {
            design: Arc::clone(&self.design),
            knots,
            values,
            column_map,
            centering_offsets,
        })
    }

    /// New basis with the interior knot `t` of covariate `j` removed; all
    /// other columns are copied bit-identically.
    pub fn remove_knot(&self, j: usize, t: f64) -> Result<BasisMatrix, SplineError> {
        let (knots, pos) = self.knots.remove(j, t)?;
        let remove_at = self.column_range(j).start + 1 + pos;
        let n = self.n();
        let mut values = Array2::<f64>::zeros((n, self.ncols() - 1));
        for col in 0..remove_at {
            values.column_mut(col).assign(&self.values.column(col));
        }
        for col in (remove_at + 1)..self.ncols() {
            values.column_mut(col - 1).assign(&self.values.column(col));
        }
        let mut column_map = self.column_map.clone();
        column_map.remove(remove_at);
        let mut centering_offsets = self.centering_offsets.clone();
        centering_offsets.remove(remove_at);
        Ok(BasisMatrix {
            design: Arc::clone(&self.design),
            knots,
            values,
            column_map,
            centering_offsets,
        })
    }

    /// Centered basis values of covariate `j`'s columns at a new point `u`.
    /// Points beyond the boundary knots evaluate through the natural linear
    /// extension of the basis terms.
    pub fn eval_component(&self, j: usize, u: f64) -> Vec<f64> {
        let c = self.knots.covariate(j);
        let range = self.column_range(j);
        let mut out = Vec::with_capacity(range.len());
        for col in range {
            let raw = match self.column_map[col].kind {
                ColumnKind::Linear => u,
                ColumnKind::Knot(t) => ncs_value(u, c.boundary_low, c.boundary_high, t),
            };
            out.push(raw - self.centering_offsets[col]);
        }
        out
    }

    /// `f_j(u) = sum_k beta_k b_jk(u)` over covariate `j`'s block.
    pub fn eval_component_dot(&self, j: usize, u: f64, beta: &[f64]) -> f64 {
        let c = self.knots.covariate(j);
        let range = self.column_range(j);
        debug_assert_eq!(beta.len(), range.len());
        let mut acc = 0.0;
        for (k, col) in range.enumerate() {
            let raw = match self.column_map[col].kind {
                ColumnKind::Linear => u,
                ColumnKind::Knot(t) => ncs_value(u, c.boundary_low, c.boundary_high, t),
            };
            acc += beta[k] * (raw - self.centering_offsets[col]);
        }
        acc
    }
}
