//! Dense Hermitian helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c(x, 0.0))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((vec![], CMat::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(hermitian_part(m), f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::EigFailure(format!("Hermitian solver, n = {n}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Ok((vals, vecs))
}

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::EigFailure(format!("symmetric solver, n = {n}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Ok((vals, vecs))
}

/// V diag(f(λ)) V† for a Hermitian matrix with eigenpairs (λ, V).
pub fn spectral_apply(vals: &[f64], vecs: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let fl = f(l);
        for i in 0..n {
            scaled[(i, j)] *= fl;
        }
    }
    scaled * vecs.adjoint()
}

pub fn herm_fn(m: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let (vals, vecs) = herm_eig(m)?;
    Ok(spectral_apply(&vals, &vecs, f))
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// tr(AB) without forming the product.
pub fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

pub fn hs_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_herm(m: &CMat) -> Result<f64> {
    let (vals, _) = herm_eig(m)?;
    Ok(vals.iter().map(|v| v.abs()).sum())
}

/// Operator norm of a Hermitian matrix.
pub fn op_norm_herm(m: &CMat) -> Result<f64> {
    let (vals, _) = herm_eig(m)?;
    Ok(vals.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn diag_c(v: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| c(x, 0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn herm_eig_reconstructs() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)]);
        let (vals, vecs) = herm_eig(&m).unwrap();
        assert!(vals[0] < vals[1]);
        let back = spectral_apply(&vals, &vecs, |x| x);
        assert!(max_abs(&(back - &m)) < 1e-14);
    }
}
