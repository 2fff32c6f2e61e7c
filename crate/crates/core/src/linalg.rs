//! Small complex linear-algebra helpers shared across the crate.
//!
//! Everything is built on dense `nalgebra` matrices over `Complex<f64>`.
//! Eigen-based routines sort their output so that results are deterministic
//! for identical inputs.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// (A + Aᴴ)/2, the exact Hermitian part of a square matrix.
pub fn hermitian_part(a: &CMat) -> CMat {
    assert_eq!(a.nrows(), a.ncols(), "hermitian_part needs a square matrix");
    let ah = a.adjoint();
    (a + ah).scale(0.5)
}

/// Largest absolute deviation of a square matrix from its Hermitian part.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let h = hermitian_part(a);
    (a - h).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns,
/// ordered consistently with the eigenvalues. The input is symmetrized
/// first so that tiny Hermitian defects do not leak into the output.
pub fn herm_eigen_sorted(a: &CMat) -> (DVector<f64>, CMat) {
    let h = hermitian_part(a);
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Largest singular value, computed as sqrt(λ_max(AᴴA)).
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    // Work on the smaller Gram matrix of the two.
    let gram = if a.nrows() >= a.ncols() {
        a.adjoint() * a
    } else {
        a * a.adjoint()
    };
    let (vals, _) = herm_eigen_sorted(&gram);
    vals[0].max(0.0).sqrt()
}

/// Frobenius norm.
pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ln det(I + B) for Hermitian PSD `B`, via a Cholesky factor of I + B.
pub fn ln_det_identity_plus(b: &CMat) -> f64 {
    let chol = cholesky_identity_plus(b);
    2.0 * chol.l().diagonal().iter().map(|z| z.re.ln()).sum::<f64>()
}

/// Cholesky factorization of I + B for Hermitian PSD `B`.
///
/// I + B is Hermitian positive definite with all eigenvalues ≥ 1, so the
/// factorization cannot fail for a genuinely PSD input.
pub fn cholesky_identity_plus(b: &CMat) -> Cholesky<Complex64, nalgebra::Dyn> {
    let n = b.nrows();
    let s = hermitian_part(b) + CMat::identity(n, n);
    Cholesky::new(s).expect("I + B is positive definite for PSD B")
}

/// Scale row `i` of `a` by `d[i]` in place (left-multiplication by diag(d)).
pub fn scale_rows_inplace(a: &mut CMat, d: &CVec) {
    assert_eq!(a.nrows(), d.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            a[(i, j)] *= d[i];
        }
    }
}

/// Scale column `j` of `a` by `d[j]` in place (right-multiplication by diag(d)).
pub fn scale_cols_inplace(a: &mut CMat, d: &CVec) {
    assert_eq!(a.ncols(), d.len());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            a[(i, j)] *= d[j];
        }
    }
}

/// Promote a real matrix to complex entries.
pub fn to_complex(a: &DMatrix<f64>) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| C64::new(a[(i, j)], 0.0))
}
