//! Individual inequality checks on explicit instances.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use super::{dense_gibbs, relative_entropy, s_covariance, s_variance, InequalityReport, SUPPORT_TOL};
use crate::error::{Error, Result};
use crate::fock::{husimi_unchecked, quasifree_dm_closed, quasifree_log_partition, reduced_dm_dense, FockModel, GibbsEnsemble};
use crate::linalg::{c, commutator, herm_eig, herm_fn, op_norm_herm, spectral_apply, trace, trace_norm_herm, trace_prod, CMat, C64};
use crate::measure::FieldSample;
use crate::rng::map_shards;

/// Pinsker: ½(tr|Γ − Γ′|)² ≤ ℋ(Γ, Γ′).
pub fn check_pinsker(g: &CMat, gp: &CMat) -> Result<InequalityReport> {
    let h = relative_entropy(g, gp)?;
    let tn = trace_norm_herm(&(g - gp))?;
    Ok(InequalityReport::le("pinsker", 0.5 * tn * tn, h, 1e-10, format!("dim={}", g.nrows())))
}

/// f(s) convexity, minimum at ½, the two-sided bound on tr(A²Γ) − f(s) and
/// the cross term bound, for Γ = e^{−H}/tr e^{−H}.
pub fn check_s_variance_suite(h: &CMat, a: &CMat, b: &CMat, s_grid: &[f64]) -> Result<Vec<InequalityReport>> {
    let (g, _, _) = dense_gibbs(h)?;
    let tol = 1e-8;
    let desc = format!("dim={}", h.nrows());
    let mut grid: Vec<f64> = s_grid.iter().copied().chain([0.0, 0.5, 1.0]).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    let f: Vec<f64> = grid.iter().map(|&s| s_variance(&g, a, s)).collect::<Result<_>>()?;
    let at = |s: f64| f[grid.iter().position(|&x| (x - s).abs() < 1e-15).expect("grid contains s")];
    let (f0, fh, f1) = (at(0.0), at(0.5), at(1.0));
    let mut out = Vec::new();
    let mut min_d2 = f64::INFINITY;
    for i in 1..grid.len().saturating_sub(1) {
        let (s0, s1, s2) = (grid[i - 1], grid[i], grid[i + 1]);
        let d2 = 2.0 * ((f[i + 1] - f[i]) / (s2 - s1) - (f[i] - f[i - 1]) / (s1 - s0)) / (s2 - s0);
        min_d2 = min_d2.min(d2);
    }
    if min_d2.is_finite() {
        out.push(InequalityReport::le("s_variance.convex", -min_d2, 0.0, 1e-9, desc.clone()));
    }
    let fmin = f.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.push(InequalityReport::le("s_variance.min_at_half", fh, fmin, tol, desc.clone()));
    out.push(InequalityReport::le("s_variance.max_at_ends", fmax, f0.max(f1), tol, desc.clone()));
    out.push(InequalityReport::le("s_variance.sqrt_nonneg", 0.0, fh, tol, desc.clone()));
    let a2 = trace_prod(&(a * a), &g).re;
    let xa = trace_prod(&commutator(&commutator(a, h), a), &g).re;
    let xb = trace_prod(&commutator(&commutator(b, h), b), &g).re;
    let abg = trace_prod(&(a * b), &g).re;
    let cross_rhs = 0.25 * xa.max(0.0).sqrt() * xb.max(0.0).sqrt();
    for (&s, &fs) in grid.iter().zip(&f) {
        let d = format!("{desc},s={s}");
        out.push(InequalityReport::le("s_variance.gap_nonneg", 0.0, a2 - fs, tol, d.clone()));
        out.push(InequalityReport::le("s_variance.gap_upper", a2 - fs, 0.25 * xa, tol, d.clone()));
        let cross = s_covariance(&g, a, b, s)?.re;
        out.push(InequalityReport::le("s_variance.cross", (cross - abg).abs(), cross_rhs, tol, d));
    }
    Ok(out)
}

/// φ(x, y) = ∫₀¹ e^{−(1−s)x − sy} ds, symmetric and overflow-free.
fn duhamel_kernel(x: f64, y: f64) -> f64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let d = hi - lo;
    if d < 1e-12 {
        return (-lo).exp() * (1.0 - 0.5 * d);
    }
    (-lo).exp() * (-(-d).exp_m1()) / d
}

struct Perturbed {
    /// eigenvalues of H − εA shifted so that the smallest is 0
    e: Vec<f64>,
    v: CMat,
    shift: f64,
}

fn perturbed(h: &CMat, a: &CMat, eps: f64) -> Result<Perturbed> {
    let (e, v) = herm_eig(&(h - a.scale(eps)))?;
    let shift = e[0];
    Ok(Perturbed { e: e.iter().map(|x| x - shift).collect(), v, shift })
}

impl Perturbed {
    /// (∂_ε tr(A^m e), tr(A^{m+1} e)) with e = e^{−(H_ε − E_min)}.
    fn derivative(&self, a: &CMat, m: usize) -> (f64, f64) {
        let at = self.v.adjoint() * a * &self.v;
        let n = self.e.len();
        let mut am = CMat::identity(n, n);
        for _ in 0..m {
            am = &am * &at;
        }
        let mut d = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                d += am[(i, j)] * at[(j, i)] * duhamel_kernel(self.e[i], self.e[j]);
            }
        }
        let am1 = &am * &at;
        let t: f64 = (0..n).map(|i| am1[(i, i)].re * (-self.e[i]).exp()).sum();
        (d.re, t)
    }

    fn weight(&self) -> CMat {
        spectral_apply(&self.e, &self.v, |x| (-x).exp())
    }
}

/// (∂_ε tr(A^m e^{−H+εA}), tr(A^{m+1} e^{−H+εA})) by the Duhamel closed form.
pub fn partition_derivative(h: &CMat, a: &CMat, eps: f64, m: usize) -> Result<(f64, f64)> {
    let p = perturbed(h, a, eps)?;
    let (d, t) = p.derivative(a, m);
    let s = (-p.shift).exp();
    Ok((d * s, t * s))
}

/// The four derivative relations at each ε, normalized by tr e^{−H_ε}
/// (they are homogeneous of degree one in e^{−H_ε}).
pub fn check_derivative_lemma(h: &CMat, a: &CMat, eps_grid: &[f64]) -> Result<Vec<InequalityReport>> {
    let x = commutator(&commutator(h, a), a);
    let y = commutator(&commutator(&x, a), a);
    let nx = op_norm_herm(&crate::linalg::hermitian_part(&x))?;
    let ny = op_norm_herm(&crate::linalg::hermitian_part(&y))?;
    let tol = 1e-8;
    let mut out = Vec::new();
    for &eps in eps_grid {
        let p = perturbed(h, a, eps)?;
        let w = p.weight();
        let z = trace(&w).re;
        let (d0, t1) = p.derivative(a, 0);
        let (d1, t2) = p.derivative(a, 1);
        let (d2, t3) = p.derivative(a, 2);
        let (d3, _) = p.derivative(a, 3);
        let (d0, t1, d1, t2, d2, t3, d3) = (d0 / z, t1 / z, d1 / z, t2 / z, d2 / z, t3 / z, d3 / z);
        let tx = (trace_prod(&x, &w).re / z).abs();
        let root = 0.25 * (ny * tx).sqrt();
        let desc = format!("dim={},eps={eps}", h.nrows());
        out.push(InequalityReport::le("derivative.d1", (d0 - t1).abs(), 0.0, 1e-9, desc.clone()));
        out.push(InequalityReport::le("derivative.d2", (d1 - t2).abs(), 0.25 * tx, tol, desc.clone()));
        out.push(InequalityReport::le("derivative.d3", (d2 - t3).abs(), t2 + 0.25 * nx * tx + root, tol, desc.clone()));
        out.push(InequalityReport::le("derivative.d4", -d3, t2 + 9.0 / 64.0 * (nx + ny) * tx + root, tol, desc));
    }
    Ok(out)
}

/// tr(A²Γ₀) ≤ 2(1 + a² + η²)η e^{aη}/a with η evaluated on a 41-point grid
/// of [−a, a]. The grid maximum under-approximates the supremum, so a pass
/// is evidence only.
pub fn check_variance_control(h: &CMat, a: &CMat, aa: f64) -> Result<Vec<InequalityReport>> {
    if !(aa > 0.0) || !aa.is_finite() {
        return Err(Error::InvalidParam(format!("a = {aa} must be positive")));
    }
    let x = commutator(&commutator(h, a), a);
    let y = commutator(&commutator(&x, a), a);
    let nx = op_norm_herm(&crate::linalg::hermitian_part(&x))?;
    let ny = op_norm_herm(&crate::linalg::hermitian_part(&y))?;
    let mut eta: f64 = 0.0;
    for i in 0..41 {
        let eps = -aa + 2.0 * aa * i as f64 / 40.0;
        let p = perturbed(h, a, eps)?;
        let w = p.weight();
        let z = trace(&w).re;
        let ta = trace_prod(a, &w).re / z;
        let tx = trace_prod(&x, &w).re / z;
        eta = eta.max(ta.abs() + aa * tx.abs().sqrt() * (nx + ny).sqrt());
    }
    let (g0, _, _) = dense_gibbs(h)?;
    let lhs = trace_prod(&(a * a), &g0).re;
    let rhs = 2.0 * (1.0 + aa * aa + eta * eta) * eta * (aa * eta).exp() / aa;
    let desc = format!("dim={},a={aa},eta={eta:.6e} (41-point grid, under-approximates sup)", h.nrows());
    let mut out = vec![InequalityReport::le("variance_control", lhs, rhs, 1e-8, desc.clone())];
    if aa <= 1.0 && eta <= 1.0 {
        out.push(InequalityReport::le("variance_control.simplified", lhs, 17.0 * eta / aa, 1e-8, desc));
    }
    Ok(out)
}

/// A Fock-space state for the entropy-to-density-matrix check.
pub enum FockState<'a> {
    Ensemble(&'a GibbsEnsemble),
    Dense { model: &'a FockModel, rho: &'a CMat },
}

/// Relative-entropy control at unit coupling with h_eff = λh: the HS bound on the
/// relative one-body density matrix, plus the intermediate bound for
/// `n_test` random admissible A ≤ c·h_eff.
pub fn check_entropy_to_dm(state: FockState<'_>, lambda: f64, n_test: usize, seed: u64) -> Result<Vec<InequalityReport>> {
    let (model, g1, rel, warn) = match state {
        FockState::Ensemble(e) => {
            let lz0 = quasifree_log_partition(&e.model.basis, lambda)?;
            if (e.lambda - lambda).abs() > 1e-15 * lambda {
                return Err(Error::InvalidParam("ensemble coupling differs from λ".into()));
            }
            (&e.model, e.reduced_dm(1)?, e.relative_entropy_to_free(lz0), e.boundary_weight)
        }
        FockState::Dense { model, rho } => {
            let lz0 = quasifree_log_partition(&model.basis, lambda)?;
            let (p, _) = herm_eig(rho)?;
            let ent: f64 = p.iter().filter(|&&x| x > SUPPORT_TOL).map(|&x| -x * x.ln()).sum();
            let kin: f64 = (0..model.dim()).map(|s| rho[(s, s)].re * model.free_energy_of(s)).sum();
            (model, reduced_dm_dense(model, rho, 1)?, -ent + lambda * kin + lz0, 0.0)
        }
    };
    let rel = rel.max(0.0);
    let basis = &model.basis;
    let k = basis.dim();
    let heff: Vec<f64> = basis.eigenvalues.iter().map(|l| lambda * l).collect();
    let diff = &g1 - quasifree_dm_closed(basis, lambda, 1)?;
    let mut lhs = 0.0;
    for i in 0..k {
        for j in 0..k {
            lhs += heff[i] * heff[j] * diff[(i, j)].norm_sqr();
        }
    }
    let rhs = 4.0 * rel * (2f64.sqrt() + rel.sqrt()).powi(2);
    let desc = format!("K={k},n_max={},lambda={lambda},boundary_weight={warn:.3e}", model.n_max);
    let mut out = vec![InequalityReport::le("entropy_to_dm", lhs, rhs, 1e-8, desc.clone())];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for t in 0..n_test {
        let cc = 0.1 + 0.8 * rng.random::<f64>();
        let b = super::suites::random_hermitian(k, &mut rng);
        let nb = op_norm_herm(&b)?.max(1e-300);
        let a = CMat::from_fn(k, k, |i, j| b[(i, j)] * (cc * (heff[i] * heff[j]).sqrt() / nb));
        let tr_ad = trace_prod(&a, &diff).re;
        let s2: f64 = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].norm_sqr() / (heff[i] * heff[j])).sum();
        out.push(InequalityReport::le("entropy_to_dm.intermediate", tr_ad, rel + s2 / (1.0 - cc), 1e-8, format!("{desc},test={t},c={cc:.4}")));
    }
    Ok(out)
}

pub fn check_entropy_to_dm_dense(model: &FockModel, rho: &CMat, lambda: f64, n_test: usize, seed: u64) -> Result<Vec<InequalityReport>> {
    check_entropy_to_dm(FockState::Dense { model, rho }, lambda, n_test, seed)
}

/// 0 ≤ tr A((e^{h−A} − 1)^{−1} − (e^h − 1)^{−1}) ≤ (1 − c)^{−1} tr(h⁻¹Ah⁻¹A),
/// for A ≤ c·h.
pub fn check_klein_perturbation(h: &CMat, a: &CMat, cc: f64) -> Result<Vec<InequalityReport>> {
    if !(cc > 0.0 && cc < 1.0) {
        return Err(Error::InvalidParam(format!("c = {cc} not in (0, 1)")));
    }
    super::same_dim(h, a)?;
    let (hv, hu) = herm_eig(h)?;
    if hv[0] <= 0.0 {
        return Err(Error::PreconditionFailed("h must be positive definite".into()));
    }
    let h_isqrt = spectral_apply(&hv, &hu, |x| x.powf(-0.5));
    let (rel, _) = herm_eig(&(&h_isqrt * a * &h_isqrt))?;
    let top = *rel.last().expect("nonempty");
    if top > cc + 1e-12 {
        return Err(Error::PreconditionFailed(format!("A ≤ c·h fails: top of h^(-1/2) A h^(-1/2) is {top} > {cc}")));
    }
    let bose = |x: f64| 1.0 / x.exp_m1();
    let pert = herm_fn(&(h - a), bose)?;
    let free = spectral_apply(&hv, &hu, bose);
    let mid = trace_prod(a, &(pert - free)).re;
    let h_inv = spectral_apply(&hv, &hu, |x| 1.0 / x);
    let ha = &h_inv * a;
    let upper = trace_prod(&ha, &ha).re / (1.0 - cc);
    let desc = format!("dim={},c={cc}", h.nrows());
    Ok(vec![
        InequalityReport::le("klein.lower", 0.0, mid, 1e-9, desc.clone()),
        InequalityReport::le("klein.upper", mid, upper, 1e-9, desc),
    ])
}

/// Dense density matrix of a single-mode ensemble padded to `dim`.
fn padded_density(e: &GibbsEnsemble, dim: usize) -> CMat {
    let d = e.density_matrix();
    let mut out = CMat::zeros(dim, dim);
    out.view_mut((0, 0), (d.nrows(), d.ncols())).copy_from(&d);
    out
}

/// ℋ_cl(μ^ε_Γ, μ^ε_{Γ′}) ≤ ℋ(Γ, Γ′) for single-mode states, with the
/// classical side importance-sampled; passes within `n_sigma` standard errors.
pub fn check_berezin_lieb(g: &GibbsEnsemble, gp: &GibbsEnsemble, eps: f64, n_mc: usize, seed: u64, n_sigma: f64) -> Result<InequalityReport> {
    if g.model.modes() != 1 || gp.model.modes() != 1 {
        return Err(Error::InvalidParam("Berezin–Lieb check is single-mode".into()));
    }
    if !(eps > 0.0) || n_mc < 2 {
        return Err(Error::InvalidParam("need ε > 0 and at least two samples".into()));
    }
    let dim = g.dim().max(gp.dim());
    let quantum = relative_entropy(&padded_density(g, dim), &padded_density(gp, dim))?;
    let nbar = g.mean_number().max(gp.mean_number());
    let s2 = 1.5 * eps * (nbar + 1.0);
    let shards = map_shards(seed, n_mc, |rng, len| {
        let (mut s, mut sq, mut infinite) = (0.0, 0.0, false);
        for _ in 0..len {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let sd = (0.5 * s2).sqrt();
            let u = FieldSample { alpha: vec![c(sd * re, sd * im)] };
            let q = (-u.norm_sqr() / s2).exp() / (std::f64::consts::PI * s2);
            let m = husimi_unchecked(g, &u, eps);
            if m <= 0.0 {
                continue;
            }
            let mp = husimi_unchecked(gp, &u, eps);
            if mp <= 0.0 {
                infinite = true;
                continue;
            }
            let x = m / q * (m / mp).ln();
            s += x;
            sq += x * x;
        }
        (s, sq, infinite)
    });
    let mut s = 0.0;
    let mut sq = 0.0;
    let mut infinite = false;
    for (a, b, i) in shards {
        s += a;
        sq += b;
        infinite |= i;
    }
    let n = n_mc as f64;
    let mean = if infinite { f64::INFINITY } else { s / n };
    let stderr = ((sq / n - (s / n).powi(2)).max(0.0) / (n - 1.0)).sqrt();
    Ok(InequalityReport::le(
        "berezin_lieb",
        mean,
        quantum + n_sigma * stderr,
        0.0,
        format!("eps={eps},n_mc={n_mc},seed={seed},stderr={stderr:.3e},quantum={quantum:.6e}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::super::tests::{sigma_x, sigma_z};
    use super::*;
    use crate::fock::{enumerate_fock, gibbs, kinetic_op};
    use crate::linalg::diag_c;
    use crate::spectral::ModeBasis;

    #[test]
    fn pinsker_examples() {
        let a = diag_c(&[1.0, 0.0]);
        let b = diag_c(&[0.5, 0.5]);
        let r = check_pinsker(&a, &b).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-15 && (r.rhs - 2f64.ln()).abs() < 1e-15 && r.pass);
        let r = check_pinsker(&a, &a).unwrap();
        assert!(r.lhs == 0.0 && r.rhs == 0.0 && r.pass);
    }

    #[test]
    fn pauli_s_variance_suite() {
        let h = sigma_z();
        let a = sigma_x();
        let reps = check_s_variance_suite(&h, &a, &a, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert!(reps.iter().all(|r| r.pass), "{reps:?}");
        let up = reps.iter().find(|r| r.name == "s_variance.gap_upper" && r.instance.ends_with("s=0.5")).unwrap();
        assert!((up.lhs - (1.0 - 1.0 / 1f64.cosh())).abs() < 1e-14);
        assert!((up.rhs - 1f64.tanh()).abs() < 1e-14);
    }

    #[test]
    fn commuting_case_has_no_slack() {
        let h = diag_c(&[0.0, 1.0, 2.5]);
        let a = diag_c(&[0.3, -0.2, 0.1]);
        for r in check_s_variance_suite(&h, &a, &a, &[0.25, 0.5]).unwrap() {
            assert!(r.pass);
            if r.name == "s_variance.gap_upper" {
                assert!(r.lhs.abs() < 1e-15 && r.rhs.abs() < 1e-15);
            }
        }
        for r in check_derivative_lemma(&h, &a, &[-0.1, 0.0, 0.1]).unwrap() {
            assert!(r.pass, "{r:?}");
            if r.name == "derivative.d2" {
                assert!(r.lhs < 1e-14 && r.rhs == 0.0);
            }
        }
    }

    #[test]
    fn feynman_hellmann_against_finite_difference() {
        let h = CMat::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(1.1, 0.0)]);
        let a = sigma_x();
        let (d, t) = partition_derivative(&h, &a, 0.05, 0).unwrap();
        let z = |e: f64| trace(&herm_fn(&(&h - a.scale(e)), |x| (-x).exp()).unwrap()).re;
        let fd = (z(0.05 + 1e-5) - z(0.05 - 1e-5)) / 2e-5;
        assert!((d - t).abs() < 1e-13);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn variance_control_zero_and_commuting() {
        let h = diag_c(&[0.0, 1.0, 2.0]);
        let z = CMat::zeros(3, 3);
        let r = check_variance_control(&h, &z, 0.2).unwrap();
        assert!(r[0].lhs == 0.0 && r[0].rhs == 0.0 && r[0].pass);
        // centred commuting observable
        let (g, _, _) = dense_gibbs(&h).unwrap();
        let raw = diag_c(&[1.0, -1.0, 0.5]);
        let mean = trace_prod(&raw, &g).re;
        let a = raw - CMat::identity(3, 3).scale(mean);
        let r = check_variance_control(&h, &a, 0.2).unwrap();
        assert!(r[0].pass && r[0].margin > 0.0, "{r:?}");
    }

    #[test]
    fn klein_examples_and_precondition() {
        let h = diag_c(&[1.0, 2.0]);
        let r = check_klein_perturbation(&h, &CMat::zeros(2, 2), 0.5).unwrap();
        assert!(r.iter().all(|x| x.pass && x.lhs.abs() < 1e-300 + 1e-16));
        let a = h.scale(0.3);
        let r = check_klein_perturbation(&h, &a, 0.3).unwrap();
        assert!(r[0].rhs > 0.0 && r.iter().all(|x| x.pass));
        // tr(h⁻¹Ah⁻¹A) = 0.09·2
        assert!((r[1].rhs - 0.18 / 0.7).abs() < 1e-14);
        assert!(matches!(check_klein_perturbation(&h, &h.scale(0.5), 0.3), Err(Error::PreconditionFailed(_))));
    }

    fn thermal(l1: f64, lambda: f64) -> GibbsEnsemble {
        let b = ModeBasis::single_mode(l1).unwrap();
        let m = enumerate_fock(&b, 150).unwrap();
        gibbs(&m, &kinetic_op(&m), lambda).unwrap()
    }

    #[test]
    fn entropy_to_dm_at_reference_is_zero() {
        let lambda = 0.6;
        let b = ModeBasis::from_spectrum(&[1.0, 1.7]).unwrap();
        let m = enumerate_fock(&b, 90).unwrap();
        let e = gibbs(&m, &kinetic_op(&m), lambda).unwrap();
        let r = check_entropy_to_dm(FockState::Ensemble(&e), lambda, 5, 1).unwrap();
        assert!(r[0].lhs < 1e-18 && r[0].rhs < 1e-9, "{:?}", r[0]);
        assert!(r.iter().all(|x| x.pass));
    }

    #[test]
    fn berezin_lieb_thermal_pairs() {
        let a = thermal(1.0, 0.5);
        let b = thermal(1.0, 1.2);
        let r = check_berezin_lieb(&a, &b, 0.5, 20_000, 3, 3.0).unwrap();
        assert!(r.pass, "{r:?}");
        let same = check_berezin_lieb(&a, &a, 0.5, 5_000, 3, 3.0).unwrap();
        assert!(same.lhs.abs() < 1e-12 && same.pass);
        let vac = thermal(1.0, 60.0);
        assert!(check_berezin_lieb(&vac, &a, 1.0, 20_000, 4, 3.0).unwrap().pass);
    }
}
