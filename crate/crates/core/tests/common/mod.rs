//! Shared test oracles: the textbook truncated-power natural cubic basis,
//! stable orthonormal projections, and distribution distances.

#![allow(dead_code)]

use ndarray::{Array1, Array2};

fn pos_cube(x: f64) -> f64 {
    if x > 0.0 {
        x * x * x
    } else {
        0.0
    }
}

/// Textbook truncated-power natural cubic spline basis (the classic
/// elements-of-statistical-learning form): `N1 = u` and, writing
/// `d_j(u) = [(u-t_j)+^3 - (u-t_(M+1))+^3]/(t_(M+1)-t_j)` with `t_0` and
/// `t_(M+1)` the boundary knots, the columns `d_k - d_M` for `k < M`.
/// Spans the same space as the production basis but with different terms.
pub fn hastie_natural_basis(x: &[f64], lo: f64, hi: f64, interior: &[f64]) -> Array2<f64> {
    let m = interior.len();
    let n = x.len();
    let mut t = Vec::with_capacity(m + 2);
    t.push(lo);
    t.extend_from_slice(interior);
    t.push(hi);
    let d = |u: f64, j: usize| -> f64 {
        (pos_cube(u - t[j]) - pos_cube(u - t[m + 1])) / (t[m + 1] - t[j])
    };
    let mut out = Array2::<f64>::zeros((n, m + 1));
    for (i, &u) in x.iter().enumerate() {
        out[[i, 0]] = u;
        for k in 0..m {
            out[[i, k + 1]] = d(u, k) - d(u, m);
        }
    }
    out
}

/// Orthonormal basis of the column space via modified Gram-Schmidt with a
/// second orthogonalization pass; columns with negligible residual norm are
/// dropped.
pub fn orthonormal_columns(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let mut q: Vec<Array1<f64>> = Vec::new();
    for col in m.columns() {
        let mut v = col.to_owned();
        let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        for _ in 0..2 {
            for u in &q {
                let proj = u.dot(&v);
                v.scaled_add(-proj, u);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 * scale {
            q.push(v / norm);
        }
    }
    let mut out = Array2::<f64>::zeros((n, q.len()));
    for (k, u) in q.iter().enumerate() {
        out.column_mut(k).assign(u);
    }
    out
}

/// Orthogonal projection matrix onto the column space of `[1 | m]`.
pub fn projection_with_intercept(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let mut with1 = Array2::<f64>::ones((n, m.ncols() + 1));
    for (j, col) in m.columns().into_iter().enumerate() {
        with1.column_mut(j + 1).assign(&col);
    }
    let q = orthonormal_columns(&with1);
    q.dot(&q.t())
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Total variation distance between two distributions over count vectors.
pub fn tv_distance(
    p: &std::collections::BTreeMap<Vec<usize>, f64>,
    q: &std::collections::BTreeMap<Vec<usize>, f64>,
) -> f64 {
    let keys: std::collections::BTreeSet<_> = p.keys().chain(q.keys()).cloned().collect();
    0.5 * keys
        .iter()
        .map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

/// Empirical distribution over visited count vectors.
pub fn empirical_counts(visits: &[Vec<usize>]) -> std::collections::BTreeMap<Vec<usize>, f64> {
    let mut map = std::collections::BTreeMap::new();
    for v in visits {
        *map.entry(v.clone()).or_insert(0.0) += 1.0;
    }
    let total = visits.len() as f64;
    for v in map.values_mut() {
        *v /= total;
    }
    map
}
