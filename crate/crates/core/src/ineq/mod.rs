//! Exact finite-dimensional evaluation of relative entropies, Duhamel
//! two-point functions and s-variances, and checks of the operator
//! inequalities built from them.

mod checks;
mod suites;

pub use checks::{
    check_berezin_lieb, check_derivative_lemma, check_entropy_to_dm, check_entropy_to_dm_dense, check_klein_perturbation,
    check_pinsker, check_s_variance_suite, check_variance_control, partition_derivative, FockState,
};
pub use suites::{run_suite, Suite, SuiteResult};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, trace_prod, CMat, C64};

/// Support threshold for eigenvalues of density matrices.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs − lhs
    pub margin: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub instance: String,
}

impl InequalityReport {
    /// Report for lhs ≤ rhs; pass iff rhs − lhs ≥ −tolerance.
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64, instance: impl Into<String>) -> Self {
        let margin = rhs - lhs;
        InequalityReport { name: name.into(), lhs, rhs, margin, pass: margin >= -tolerance, tolerance, instance: instance.into() }
    }
}

fn check_square(m: &CMat) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    Ok(m.nrows())
}

fn same_dim(a: &CMat, b: &CMat) -> Result<()> {
    let n = check_square(a)?;
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.nrows() });
    }
    Ok(())
}

/// ℋ(Γ, Γ′) = tr Γ(log Γ − log Γ′), +∞ when supp Γ ⊄ supp Γ′.
pub fn relative_entropy(g: &CMat, gp: &CMat) -> Result<f64> {
    same_dim(g, gp)?;
    let (p, _) = herm_eig(g)?;
    let (q, w) = herm_eig(gp)?;
    let ent: f64 = p.iter().filter(|&&x| x > SUPPORT_TOL).map(|&x| x * x.ln()).sum();
    let mut cross = 0.0;
    let mut leak = 0.0;
    for (j, &qj) in q.iter().enumerate() {
        let wj = w.column(j);
        let weight = (wj.adjoint() * g * wj)[(0, 0)].re;
        if qj > SUPPORT_TOL {
            cross += weight * qj.ln();
        } else {
            leak += weight;
        }
    }
    if leak > SUPPORT_TOL {
        return Ok(f64::INFINITY);
    }
    Ok((ent - cross).max(0.0))
}

/// Mixes 1e−14·identity into a rank-deficient state.
pub fn regularize(g: &CMat) -> Result<CMat> {
    let n = check_square(g)?;
    let (p, _) = herm_eig(g)?;
    if p[0] > 1e-14 {
        return Ok(g.clone());
    }
    let eps = 1e-14;
    Ok(g.scale(1.0 - n as f64 * eps) + CMat::identity(n, n).scale(eps))
}

/// (p − q)/(log p − log q), with the limit p on near-equal logs.
pub fn log_mean(p: f64, q: f64) -> f64 {
    let (lp, lq) = (p.ln(), q.ln());
    if (lp - lq).abs() < 1e-12 {
        return p;
    }
    (p - q) / (lp - lq)
}

/// Duhamel two-point function ∫₀¹ tr(AΓ^sBΓ^{1−s}) ds − tr(AΓ)tr(BΓ), real part.
pub fn duhamel(g: &CMat, a: &CMat, b: &CMat) -> Result<f64> {
    same_dim(g, a)?;
    same_dim(g, b)?;
    let g = regularize(g)?;
    let (p, v) = herm_eig(&g)?;
    let at = v.adjoint() * a * &v;
    let bt = v.adjoint() * b * &v;
    let n = p.len();
    let mut s = C64::new(0.0, 0.0);
    for m in 0..n {
        for k in 0..n {
            s += at[(m, k)] * bt[(k, m)] * log_mean(p[m], p[k]);
        }
    }
    let ta = trace_prod(a, &g);
    let tb = trace_prod(b, &g);
    Ok((s - ta * tb).re)
}

/// tr(AΓ^sBΓ^{1−s}) with 0⁰ = 1.
pub fn s_covariance(g: &CMat, a: &CMat, b: &CMat, s: f64) -> Result<C64> {
    same_dim(g, a)?;
    same_dim(g, b)?;
    let (p, v) = herm_eig(g)?;
    let p: Vec<f64> = p.into_iter().map(|x| x.max(0.0)).collect();
    let at = v.adjoint() * a * &v;
    let bt = v.adjoint() * b * &v;
    let n = p.len();
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..n {
        let pm = p[m].powf(1.0 - s);
        for k in 0..n {
            acc += at[(m, k)] * p[k].powf(s) * bt[(k, m)] * pm;
        }
    }
    Ok(acc)
}

/// f(s) = tr(AΓ^sAΓ^{1−s}).
pub fn s_variance(g: &CMat, a: &CMat, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParam(format!("s = {s} not in [0, 1]")));
    }
    Ok(s_covariance(g, a, a, s)?.re)
}

/// e^{−H}/tr e^{−H} with eigenpairs of H.
pub fn dense_gibbs(h: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    check_square(h)?;
    let (e, v) = herm_eig(h)?;
    let e0 = e[0];
    let z: f64 = e.iter().map(|x| (-(x - e0)).exp()).sum();
    let g = crate::linalg::spectral_apply(&e, &v, |x| (-(x - e0)).exp() / z);
    Ok((g, e, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diag_c};

    pub(crate) fn sigma_z() -> CMat {
        diag_c(&[1.0, -1.0])
    }

    pub(crate) fn sigma_x() -> CMat {
        CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    #[test]
    fn relative_entropy_examples() {
        let a = diag_c(&[1.0, 0.0]);
        let b = diag_c(&[0.5, 0.5]);
        assert_eq!(relative_entropy(&a, &a).unwrap(), 0.0);
        assert!((relative_entropy(&a, &b).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(relative_entropy(&b, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn pauli_duhamel_and_s_variance() {
        let (g, _, _) = dense_gibbs(&sigma_z()).unwrap();
        let a = sigma_x();
        let d = duhamel(&g, &a, &a).unwrap();
        assert!((d - 1f64.tanh()).abs() < 1e-14);
        let f = s_variance(&g, &a, 0.5).unwrap();
        assert!((f - 1.0 / 1f64.cosh()).abs() < 1e-14);
        assert!((s_variance(&g, &a, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((s_variance(&g, &a, 1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn duhamel_commuting_is_covariance() {
        let g = diag_c(&[0.5, 0.3, 0.2]);
        let a = diag_c(&[1.0, -2.0, 0.5]);
        let cov = trace_prod(&(&a * &a), &g).re - trace_prod(&a, &g).re.powi(2);
        assert!((duhamel(&g, &a, &a).unwrap() - cov).abs() < 1e-14);
    }
}
