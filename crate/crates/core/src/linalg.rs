//! Dense linear-algebra helpers with void-matrix conventions.
//!
//! Matrices with zero rows or columns are legal everywhere: their rank is
//! zero, products through a zero inner dimension are zero matrices and the
//! 0x0 matrix counts as symmetric positive semidefinite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Relative tolerance policy for numerical rank decisions.
///
/// A singular value counts when `sigma > max(rows, cols) * sigma_max * rel`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTol {
    pub rel: f64,
}

impl Default for RankTol {
    fn default() -> Self {
        RankTol { rel: 1e-10 }
    }
}

impl RankTol {
    pub fn new(rel: f64) -> Self {
        RankTol { rel }
    }

    pub fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        rows.max(cols) as f64 * sigma_max * self.rel
    }
}

pub fn is_void(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || m.ncols() == 0
}

struct SortedSvd {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v_t: DMatrix<f64>,
}

/// Thin SVD with singular values sorted in decreasing order.
fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let v_t = DMatrix::from_fn(k, v_t.ncols(), |r, c| v_t[(order[r], c)]);
    SortedSvd { u, sigma, v_t }
}

/// Singular values in decreasing order; empty for void input.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if is_void(m) {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn count_above(sigma: &[f64], rows: usize, cols: usize, tol: RankTol) -> usize {
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let thr = tol.threshold(rows, cols, smax);
    sigma.iter().filter(|&&s| s > thr).count()
}

pub fn numerical_rank(m: &DMatrix<f64>, tol: RankTol) -> usize {
    count_above(&singular_values(m), m.nrows(), m.ncols(), tol)
}

/// Orthonormal basis of the column space, `rows x rank`.
pub fn range_basis(m: &DMatrix<f64>, tol: RankTol) -> DMatrix<f64> {
    if is_void(m) {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = sorted_svd(m);
    let r = count_above(&svd.sigma, m.nrows(), m.ncols(), tol);
    svd.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the kernel, `cols x (cols - rank)`.
pub fn null_space(m: &DMatrix<f64>, tol: RankTol) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad with zero rows so the thin SVD returns a full set of right vectors.
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = sorted_svd(&padded);
    let r = count_above(&svd.sigma, m.nrows(), m.ncols(), tol);
    svd.v_t.rows(r, cols - r).transpose()
}

/// Moore-Penrose pseudoinverse via SVD with the given rank policy.
pub fn pinv(m: &DMatrix<f64>, tol: RankTol) -> DMatrix<f64> {
    if is_void(m) {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = sorted_svd(m);
    let r = count_above(&svd.sigma, m.nrows(), m.ncols(), tol);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for k in 0..r {
        let v = svd.v_t.row(k).transpose();
        let u = svd.u.column(k);
        out += (v * u.transpose()) / svd.sigma[k];
    }
    out
}

/// Symmetric eigendecomposition with eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    (m - m.transpose()).amax()
}

/// Largest absolute entry, zero for void matrices.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    if is_void(m) {
        0.0
    } else {
        m.amax()
    }
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Euclidean projection onto the PSD cone, optionally shifted: `{ X : X >= shift * I }`.
pub fn project_psd_shifted(m: &DMatrix<f64>, shift: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let (vals, vecs) = sym_eigen(m);
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let keep = (lam - shift).max(0.0);
        scaled.column_mut(j).scale_mut(keep);
    }
    let mut out = &scaled * vecs.transpose();
    out = symmetrize(&out);
    for i in 0..n {
        out[(i, i)] += shift;
    }
    out
}

pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    project_psd_shifted(m, 0.0)
}

/// Vertical concatenation; all blocks must share a column count.
pub fn vstack(blocks: &[&DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Horizontal concatenation; all blocks must share a row count.
pub fn hstack(blocks: &[&DMatrix<f64>], rows: usize) -> DMatrix<f64> {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Embeds `m` into a `size x size` zero matrix at `(offset, offset)`.
pub fn embed(m: &DMatrix<f64>, size: usize, offset: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(size, size);
    out.view_mut((offset, offset), (m.nrows(), m.ncols())).copy_from(m);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn void_products_follow_conventions() {
        let a = DMatrix::<f64>::zeros(2, 0);
        let b = DMatrix::<f64>::zeros(0, 3);
        let ab = &a * &b;
        assert_eq!(ab.shape(), (2, 3));
        assert_eq!(ab.amax(), 0.0);
        let ba = &b.transpose() * &a.transpose();
        assert_eq!(ba.shape(), (3, 2));
    }

    #[test]
    fn rank_of_void_and_zero() {
        assert_eq!(numerical_rank(&DMatrix::zeros(0, 4), RankTol::default()), 0);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), RankTol::default()), 0);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(numerical_rank(&m, RankTol::default()), 1);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m, RankTol::default());
        assert_eq!(ns.shape(), (3, 2));
        assert!((&m * &ns).amax() < 1e-14);
        let gram = ns.transpose() * &ns;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn range_basis_is_orthonormal() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let g = range_basis(&m, RankTol::default());
        assert_eq!(g.ncols(), 1);
        let resid = &m - &g * (g.transpose() * &m);
        assert!(resid.amax() < 1e-12);
    }

    #[test]
    fn pinv_is_left_inverse_for_full_column_rank() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let p = pinv(&m, RankTol::default());
        assert!((p * &m - DMatrix::identity(2, 2)).amax() < 1e-13);
    }

    #[test]
    fn psd_projection_clips_negative_part() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = project_psd(&m);
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!((p - expected).amax() < 1e-14);
    }
}
