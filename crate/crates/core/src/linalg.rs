//! Thin wrappers around faer's self-adjoint eigensolvers.
//!
//! Matrices are stored complex; when every entry is real the decomposition is
//! routed through the real symmetric solver, which is several times faster.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

/// Largest absolute row sum; an upper bound for the spectral norm.
pub fn inf_norm(a: &CMat) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn hermitian_defect(a: &CMat) -> f64 {
    let mut d = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..=i {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d
}

fn is_real(a: &CMat) -> bool {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)].im != 0.0 {
                return false;
            }
        }
    }
    true
}

fn check(a: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!("matrix is {}x{}", a.nrows(), a.ncols())));
    }
    let d = hermitian_defect(a);
    if d > 1e-8 * inf_norm(a).max(1e-300) {
        return Err(Error::NotHermitianMatrix(d));
    }
    Ok(())
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigvalsh(a: &CMat) -> Result<Vec<f64>> {
    check(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if is_real(a) {
        let r = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)].re);
        return eigvalsh_real(&r);
    }
    let v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(sorted(v))
}

pub fn eigvalsh_real(a: &Mat<f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(sorted(v))
}

/// Ascending eigenvalues and orthonormal eigenvectors (columns).
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    check(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let (vals, vecs) = if is_real(a) {
        let r = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)].re);
        let e = r
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = e.S().column_vector();
        let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let u = e.U();
        (vals, Mat::<Complex64>::from_fn(n, n, |i, j| Complex64::new(u[(i, j)], 0.0)))
    } else {
        let e = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = e.S().column_vector();
        let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
        (vals, e.U().to_owned())
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let v = order.iter().map(|&i| vals[i]).collect();
    let u = Mat::<Complex64>::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok((v, u))
}

/// `max_j |lambda_j|` of a Hermitian matrix.
pub fn spectral_norm_h(a: &CMat) -> Result<f64> {
    let v = eigvalsh(a)?;
    Ok(v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// Solves `a x = b` for a general square complex matrix.
pub fn solve(a: &CMat, b: &CMat) -> CMat {
    use faer::linalg::solvers::Solve;
    a.partial_piv_lu().solve(b)
}

/// Smallest singular value of a square complex matrix.
pub fn min_singular_value(a: &CMat) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(s.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Sub-matrix on the given row/column index set.
pub fn submatrix(a: &CMat, idx: &[usize]) -> CMat {
    Mat::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

pub fn block(a: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}
