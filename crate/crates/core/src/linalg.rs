//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SieveError};

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (j, &i) in idx.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).0[0]
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let v = sym_eigen(m).0;
    v[v.len() - 1]
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    let v = sym_eigen(m).0;
    v[0].abs().max(v[v.len() - 1].abs())
}

/// Spectral norm of a general matrix (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Symmetric inverse square root `G^{-1/2}`; fails when `G` is singular
/// relative to `K * eps * λ_max`.
pub fn inv_sqrt_sym(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen(g);
    let k = vals.len();
    let tol = rank_tolerance(k, vals[k - 1].abs());
    if vals[0] <= tol {
        return Err(SieveError::SingularGram { min_eigenvalue: vals[0] });
    }
    let d = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v.sqrt()));
    Ok(&vecs * d * vecs.transpose())
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix and its numerical rank.
pub fn pinv_sym(g: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (vals, vecs) = sym_eigen(g);
    let k = vals.len();
    let tol = rank_tolerance(k, vals[k - 1].abs());
    let mut rank = 0;
    let inv = vals.map(|v| {
        if v > tol {
            rank += 1;
            1.0 / v
        } else {
            0.0
        }
    });
    (&vecs * DMatrix::from_diagonal(&inv) * vecs.transpose(), rank)
}

/// Singular values below `K * eps * σ_max` count as zero.
pub fn rank_tolerance(k: usize, sigma_max: f64) -> f64 {
    k as f64 * f64::EPSILON * sigma_max
}

/// Induced ℓ∞ norm: maximum absolute row sum.
pub fn ell_inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Largest `|i - j|` with `|m[(i,j)]| > tol`.
pub fn half_bandwidth(m: &DMatrix<f64>, tol: f64) -> usize {
    let mut bw = 0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)].abs() > tol {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inverse_square_root_whitens() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let w = inv_sqrt_sym(&g).unwrap();
        let id = &w * &g * &w;
        assert!((id - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn singular_gram_is_reported() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(inv_sqrt_sym(&g), Err(SieveError::SingularGram { .. })));
        let (p, rank) = pinv_sym(&g);
        assert_eq!(rank, 1);
        assert_abs_diff_eq!(p[(0, 0)], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn ell_inf_and_band() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 4.0]);
        assert_eq!(ell_inf_norm(&m), 4.0);
        assert_eq!(half_bandwidth(&m, 0.0), 1);
    }
}
