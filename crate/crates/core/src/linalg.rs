use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

#[allow(unused_imports)]
use num_traits::Float;

/// Solve `a x = b` for symmetric positive definite `a`.
/// Near-singular systems (pivot below `1e-12` of its diagonal entry) are rejected.
pub(crate) fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let diag: Vec<f64> = a.diagonal().iter().copied().collect();
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    for (k, d) in diag.iter().enumerate() {
        let piv = l[(k, k)] * l[(k, k)];
        if !(piv > 1e-12 * d.abs()) {
            return None;
        }
    }
    Some(chol.solve(b))
}

/// Eigenvalues of a symmetric matrix, sorted in descending order.
pub(crate) fn symmetric_eigenvalues_desc(m: DMatrix<f64>) -> Vec<f64> {
    let ev = m.symmetric_eigenvalues();
    let mut v: Vec<f64> = ev.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `aᵀ a` for a tall or wide matrix.
pub(crate) fn gram_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = a.tr_mul(a);
    symmetrize(&mut g);
    g
}

/// `a aᵀ`.
pub(crate) fn gram_rows(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = a * a.transpose();
    symmetrize(&mut g);
    g
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

pub(crate) fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (k, &c) in cols.iter().enumerate() {
        out.column_mut(k).copy_from(&m.column(c));
    }
    out
}

pub(crate) fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
