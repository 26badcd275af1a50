//! Coherent-state lower symbols and the de Finetti identity.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::gibbs::GibbsEnsemble;
use super::sym_tensor_identity;
use crate::error::{Error, Result};
use crate::linalg::{hs_norm, trace_norm_herm, CMat, C64};
use crate::measure::FieldSample;
use crate::rng::map_shards;

/// P(N > n_max) for N ~ Poisson(μ).
fn poisson_upper_tail(mu: f64, n_max: usize) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let start = n_max + 1;
    let ln_fact: f64 = (1..=start).map(|j| (j as f64).ln()).sum();
    let mut term = (-mu + start as f64 * mu.ln() - ln_fact).exp();
    let mut sum = 0.0;
    let mut m = start;
    loop {
        sum += term;
        m += 1;
        term *= mu / m as f64;
        if (m + 1) as f64 > 2.0 * mu && (term < 1e-300 || term < 1e-18 * sum) {
            break;
        }
    }
    // geometric majorant of the remainder, ratio ≤ ½
    (sum + 2.0 * term).min(1.0)
}

/// Σ_{n,n′} conj(c_n) ρ_{nn′} c_{n′} with c_n = Π_j v_j^{n_j}/√(n_j!).
fn coherent_quadratic_form(ens: &GibbsEnsemble, v: &[C64]) -> f64 {
    let model = &ens.model;
    let k = model.modes();
    let n_max = model.n_max;
    let pw: Vec<Vec<C64>> = v
        .iter()
        .map(|&vj| {
            let mut row = Vec::with_capacity(n_max + 1);
            row.push(C64::new(1.0, 0.0));
            for n in 1..=n_max {
                let prev = row[n - 1];
                row.push(prev * vj / (n as f64).sqrt());
            }
            row
        })
        .collect();
    let coef = |s: usize| -> C64 { model.occupation(s).iter().enumerate().take(k).map(|(j, &n)| pw[j][n as usize]).product() };
    let mut total = 0.0;
    for b in &ens.blocks {
        let c: Vec<C64> = b.states.iter().map(|&s| coef(s)).collect();
        if c.len() == 1 {
            total += b.rho[(0, 0)].re * c[0].norm_sqr();
            continue;
        }
        let mut acc = C64::new(0.0, 0.0);
        for (a, ca) in c.iter().enumerate() {
            let mut row = C64::new(0.0, 0.0);
            for (bb, cb) in c.iter().enumerate() {
                row += b.rho[(a, bb)] * cb;
            }
            acc += ca.conj() * row;
        }
        total += acc.re;
    }
    total.max(0.0)
}

/// Husimi density (επ)^{−K}⟨ξ(u/√ε), Γ ξ(u/√ε)⟩ without the coherent-tail
/// check. Exact for the truncated state itself, since Γ lives on n ≤ n_max.
pub fn husimi_unchecked(ens: &GibbsEnsemble, u: &FieldSample, eps: f64) -> f64 {
    let s = eps.sqrt().recip();
    let v: Vec<C64> = u.alpha.iter().map(|a| a * s).collect();
    let v2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (eps * PI).powi(-(v.len() as i32)) * (-v2).exp() * coherent_quadratic_form(ens, &v)
}

/// Husimi density, refusing points whose coherent state leaks past n_max.
pub fn husimi(ens: &GibbsEnsemble, u: &FieldSample, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParam(format!("ε = {eps} must be positive")));
    }
    let k = ens.model.modes();
    if u.alpha.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: u.alpha.len() });
    }
    let tail = poisson_upper_tail(u.norm_sqr() / eps, ens.model.n_max);
    if tail > 1e-10 {
        return Err(Error::CutoffTooSmall { tail });
    }
    Ok(husimi_unchecked(ens, u, eps))
}

/// Total mass ∫ dμ^ε_Γ by importance sampling from a Gaussian of per-mode
/// variance 1.5·ε(Γ^{(1)}_{jj} + 1).
pub fn husimi_mass(ens: &GibbsEnsemble, eps: f64, n: usize, seed: u64) -> Result<crate::measure::MCEstimate> {
    if !(eps > 0.0) || !eps.is_finite() || n < 2 {
        return Err(Error::InvalidParam("need ε > 0 and at least two samples".into()));
    }
    let kk = ens.model.modes();
    let g1 = ens.reduced_dm(1)?;
    let sigma2: Vec<f64> = (0..kk).map(|j| 1.5 * eps * (g1[(j, j)].re.max(0.0) + 1.0)).collect();
    let shards = map_shards(seed, n, |rng, len| {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let (u, log_q) = proposal_draw(rng, &sigma2);
            let w = husimi_unchecked(ens, &FieldSample { alpha: u }, eps) / log_q.exp();
            s += w;
            s2 += w * w;
        }
        (s, s2)
    });
    let (s, s2) = shards.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = n as f64;
    let mean = s / nf;
    let stderr = ((s2 / nf - mean * mean).max(0.0) / (nf - 1.0)).sqrt();
    Ok(crate::measure::MCEstimate { mean, stderr, n_samples: n, seed })
}

/// One complex Gaussian draw with E|u_j|² = σ_j², and its log density.
fn proposal_draw<R: Rng + ?Sized>(rng: &mut R, sigma2: &[f64]) -> (Vec<C64>, f64) {
    let mut log_q = 0.0;
    let u = sigma2
        .iter()
        .map(|&s2| {
            let s = (0.5 * s2).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = C64::new(s * re, s * im);
            log_q += -(PI * s2).ln() - z.norm_sqr() / s2;
            z
        })
        .collect();
    (u, log_q)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeFinettiReport {
    pub order: usize,
    pub epsilon: f64,
    pub n_mc: usize,
    pub seed: u64,
    /// max entry of |∫|u^{⊗k}⟩⟨u^{⊗k}| dμ^ε (MC) − identity right side|
    pub max_abs_residual: f64,
    /// max over entries of |residual| / stderr
    pub max_z: f64,
    pub residual_hs: f64,
    pub aggregate_stderr: f64,
    /// tr|k!ε^kΓ^{(k)} − ∫…| from the identity itself
    pub trace_norm_identity: f64,
    /// same quantity with the MC integral
    pub trace_norm_mc: f64,
    pub bound: f64,
    /// moments ⟨𝒩^ℓ⟩, ℓ = 0..k−1
    pub number_moments: Vec<f64>,
    pub within_noise: bool,
    pub bound_holds: bool,
}

/// Sum over ℓ < k of C(k,ℓ)² (k−ℓ+d−1)!/(d−1)! ⟨𝒩^ℓ⟩, times ε^k.
fn definetti_bound(k: usize, d: usize, eps: f64, moments: &[f64]) -> f64 {
    let mut s = 0.0;
    for (l, &m) in moments.iter().enumerate().take(k) {
        let ckl = crate::special::binomial(k as u64, l as u64) as f64;
        let ratio: f64 = (d..d + k - l).map(|x| x as f64).product();
        s += ckl * ckl * ratio * m;
    }
    eps.powi(k as i32) * s
}

/// MC check of ∫|u^{⊗k}⟩⟨u^{⊗k}| dμ^ε_Γ = k!ε^k Σ_{ℓ≤k} C(k,ℓ) Γ^{(ℓ)} ⊗_s 1
/// with the Husimi measure sampled by importance sampling from a Gaussian
/// of per-mode variance 1.5·ε(Γ^{(1)}_{jj} + 1).
pub fn definetti_residual(ens: &GibbsEnsemble, k: usize, eps: f64, n_mc: usize, seed: u64) -> Result<DeFinettiReport> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidParam(format!("de Finetti order {k} not in {{1, 2}}")));
    }
    if !(eps > 0.0) || !eps.is_finite() || n_mc < 2 {
        return Err(Error::InvalidParam("need ε > 0 and at least two samples".into()));
    }
    let kk = ens.model.modes();
    let g1 = ens.reduced_dm(1)?;
    let rhs = if k == 1 {
        (&g1 + CMat::identity(kk, kk)).scale(eps)
    } else {
        let g2 = ens.reduced_dm(2)?;
        (g2 + sym_tensor_identity(&g1).scale(2.0) + super::sym_projector(kk)).scale(2.0 * eps * eps)
    };
    let top = if k == 1 { g1.scale(eps) } else { ens.reduced_dm(2)?.scale(2.0 * eps * eps) };
    let sigma2: Vec<f64> = (0..kk).map(|j| 1.5 * eps * (g1[(j, j)].re.max(0.0) + 1.0)).collect();
    let dim = kk.pow(k as u32);
    let shards = map_shards(seed, n_mc, |rng, len| {
        let mut sum = CMat::zeros(dim, dim);
        let mut sq = DMatrix::<f64>::zeros(dim, dim);
        let mut t = vec![C64::new(0.0, 0.0); dim];
        for _ in 0..len {
            let (u, log_q) = proposal_draw(rng, &sigma2);
            let sample = FieldSample { alpha: u };
            let w = husimi_unchecked(ens, &sample, eps) / log_q.exp();
            let u = &sample.alpha;
            if k == 1 {
                t.copy_from_slice(u);
            } else {
                for a in 0..kk {
                    for b in 0..kk {
                        t[a * kk + b] = u[a] * u[b];
                    }
                }
            }
            for a in 0..dim {
                for b in 0..dim {
                    let x = t[a] * t[b].conj() * w;
                    sum[(a, b)] += x;
                    sq[(a, b)] += x.norm_sqr();
                }
            }
        }
        (sum, sq)
    });
    let mut sum = CMat::zeros(dim, dim);
    let mut sq = DMatrix::<f64>::zeros(dim, dim);
    for (s, q) in shards {
        sum += s;
        sq += q;
    }
    let n = n_mc as f64;
    let lhs = sum.scale(1.0 / n);
    let stderr = DMatrix::from_fn(dim, dim, |a, b| ((sq[(a, b)] / n - lhs[(a, b)].norm_sqr()).max(0.0) / (n - 1.0)).sqrt());
    let residual = &lhs - &rhs;
    let max_abs_residual = residual.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let max_z = residual.iter().zip(stderr.iter()).map(|(r, s)| if *s > 0.0 { r.norm() / s } else if r.norm() > 1e-14 { f64::INFINITY } else { 0.0 }).fold(0.0, f64::max);
    let aggregate_stderr = stderr.iter().map(|s| s * s).sum::<f64>().sqrt();
    let moments = {
        let m = ens.number_moments(0.0);
        let mut v = vec![1.0];
        v.extend_from_slice(&m[..k - 1]);
        v
    };
    let bound = definetti_bound(k, kk, eps, &moments);
    let herm = |m: CMat| crate::linalg::hermitian_part(&m);
    let trace_norm_identity = trace_norm_herm(&herm(&top - &rhs))?;
    let trace_norm_mc = trace_norm_herm(&herm(&top - &lhs))?;
    let slack = 4.0 * (dim as f64).sqrt() * aggregate_stderr;
    Ok(DeFinettiReport {
        order: k,
        epsilon: eps,
        n_mc,
        seed,
        max_abs_residual,
        max_z,
        residual_hs: hs_norm(&residual),
        aggregate_stderr,
        trace_norm_identity,
        trace_norm_mc,
        bound,
        number_moments: moments,
        within_noise: max_z <= 4.0,
        bound_holds: trace_norm_identity <= bound * (1.0 + 1e-12) + 1e-14 && trace_norm_mc <= bound + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{enumerate_fock, gibbs, kinetic_op};
    use super::*;
    use crate::spectral::ModeBasis;

    fn thermal(l1: f64, lambda: f64, n_max: usize) -> GibbsEnsemble {
        let b = ModeBasis::single_mode(l1).unwrap();
        let m = enumerate_fock(&b, n_max).unwrap();
        gibbs(&m, &kinetic_op(&m), lambda).unwrap()
    }

    #[test]
    fn vacuum_husimi_closed_form() {
        let vac = thermal(1.0, 60.0, 30);
        for &(re, im) in &[(0.0, 0.0), (0.3, -0.4), (1.2, 0.5)] {
            let u = FieldSample { alpha: vec![C64::new(re, im)] };
            let v = husimi(&vac, &u, 1.0).unwrap();
            let exact = (-(re * re + im * im)).exp() / PI;
            assert!((v - exact).abs() < 1e-14 * exact.max(1e-300));
        }
        let far = FieldSample { alpha: vec![C64::new(6.0, 0.0)] };
        assert!(matches!(husimi(&vac, &far, 1.0), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn thermal_husimi_is_gaussian() {
        // Husimi of a thermal mode with mean n̄ is Gaussian with variance ε(n̄+1)
        let lambda = 0.5;
        let ens = thermal(1.0, lambda, 200);
        let nbar = 1.0 / lambda.exp_m1();
        let eps = 0.3;
        for &r in &[0.0, 0.5, 1.1] {
            let u = FieldSample { alpha: vec![C64::new(r, 0.2)] };
            let s2 = eps * (nbar + 1.0);
            let exact = (-(r * r + 0.04) / s2).exp() / (PI * s2);
            let v = husimi(&ens, &u, eps).unwrap();
            assert!((v - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn husimi_integrates_to_one() {
        let ens = thermal(1.0, 0.7, 150);
        let m = husimi_mass(&ens, 1.0, 20_000, 5).unwrap();
        assert!((m.mean - 1.0).abs() <= 4.0 * m.stderr, "{m:?}");
    }

    #[test]
    fn definetti_vacuum_and_thermal() {
        let vac = thermal(1.0, 60.0, 30);
        let r = definetti_residual(&vac, 1, 1.0, 20_000, 1).unwrap();
        assert!(r.within_noise && r.bound_holds, "{r:?}");
        let th = thermal(1.0, 0.4, 200);
        for k in [1, 2] {
            let r = definetti_residual(&th, k, 0.4, 40_000, 2).unwrap();
            assert!(r.within_noise, "{r:?}");
            assert!(r.bound_holds, "{r:?}");
        }
    }

    #[test]
    fn poisson_tail_sane() {
        assert_eq!(poisson_upper_tail(0.0, 3), 0.0);
        assert!((poisson_upper_tail(1.0, 0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(poisson_upper_tail(2.0, 40) < 1e-20);
    }
}
