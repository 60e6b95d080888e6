use nalgebra::DMatrix;

use crate::error::{invalid, numeric, Result};

/// Ridge added to both auto-covariance blocks by default.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Canonical correlations between two blocks of paired observations,
/// in descending order, `min(p, q)` of them.
///
/// Rows are observations. See [`cca_with_ridge`].
pub fn cca(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<Vec<f64>> {
    cca_with_ridge(x, y, DEFAULT_RIDGE)
}

/// CCA through the whitened cross-covariance: with `Sxx = Lx Lx^T` and
/// `Syy = Ly Ly^T`, the canonical correlations are the singular values of
/// `Lx^-1 Sxy Ly^-T`. `ridge` is added to the diagonals of `Sxx` and `Syy`.
pub fn cca_with_ridge(x: &[Vec<f64>], y: &[Vec<f64>], ridge: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if y.len() != n {
        return Err(invalid(format!("blocks have {} and {} rows", n, y.len())));
    }
    let p = x.first().map_or(0, Vec::len);
    let q = y.first().map_or(0, Vec::len);
    if p == 0 || q == 0 {
        return Err(invalid("blocks must have at least one column"));
    }
    if n <= p.max(q) + 1 {
        return Err(invalid(format!(
            "cca needs more than {} rows, got {n}",
            p.max(q) + 1
        )));
    }
    let xm = centered(x, p)?;
    let ym = centered(y, q)?;
    let denom = (n - 1) as f64;
    let mut sxx = xm.transpose() * &xm / denom;
    let mut syy = ym.transpose() * &ym / denom;
    let sxy = xm.transpose() * &ym / denom;

    for (block, name) in [(&sxx, "first"), (&syy, "second")] {
        let scale = block.diagonal().max().max(f64::MIN_POSITIVE);
        if block.diagonal().iter().any(|v| *v <= 1e-12 * scale || *v == 0.0) {
            return Err(numeric(format!("{name} block has a constant column")));
        }
    }
    for i in 0..p {
        sxx[(i, i)] += ridge;
    }
    for i in 0..q {
        syy[(i, i)] += ridge;
    }
    let lx = sxx
        .cholesky()
        .ok_or_else(|| numeric("first block is rank deficient"))?
        .l();
    let ly = syy
        .cholesky()
        .ok_or_else(|| numeric("second block is rank deficient"))?
        .l();
    let left = lx
        .solve_lower_triangular(&sxy)
        .ok_or_else(|| numeric("whitening failed"))?;
    // (Lx^-1 Sxy) Ly^-T = (Ly^-1 (Lx^-1 Sxy)^T)^T
    let m = ly
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| numeric("whitening failed"))?
        .transpose();
    let mut sv: Vec<f64> = m
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.truncate(p.min(q));
    Ok(sv)
}

fn centered(rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(invalid("rows have inconsistent widths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite values in cca input"));
    }
    let mut m = DMatrix::from_fn(n, cols, |i, j| rows[i][j]);
    for j in 0..cols {
        let mean = m.column(j).mean();
        m.column_mut(j).add_scalar_mut(-mean);
    }
    Ok(m)
}
