//! Small dense helpers shared by the solvers and oracles.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn mat_inf_norm(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Cholesky of `m + tau I`, with `tau` walking the ladder `start * 2^k`
/// (starting from zero) until the factorization succeeds.
pub fn regularized_cholesky(
    m: &Mat,
    start: f64,
    max_steps: usize,
) -> Option<(Cholesky<f64, Dyn>, f64)> {
    if let Some(ch) = m.clone().cholesky() {
        return Some((ch, 0.0));
    }
    let n = m.nrows();
    let mut tau = start;
    for _ in 0..max_steps {
        let shifted = m + Mat::identity(n, n) * tau;
        if let Some(ch) = shifted.cholesky() {
            return Some((ch, tau));
        }
        tau *= 2.0;
    }
    None
}

pub fn mat_from_rows(rows: &[Vec<f64>], ncols_hint: usize) -> Option<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(ncols_hint, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Mat::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

pub fn mat_to_row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter().copied());
    }
    out
}

pub fn mat_from_row_major(n: usize, m: usize, data: &[f64]) -> Option<Mat> {
    (data.len() == n * m).then(|| Mat::from_row_slice(n, m, data))
}

/// Rank check through the Gram matrix; `s` is expected short and wide.
pub fn has_full_row_rank(s: &Mat) -> bool {
    if s.nrows() > s.ncols() {
        return false;
    }
    let sv = s.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > max * 1e-12
}
