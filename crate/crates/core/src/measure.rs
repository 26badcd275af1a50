//! Gaussian measure μ₀ with covariance h⁻¹ on the retained modes, the
//! Wick-renormalized interaction D_K and Monte Carlo estimates under the
//! nonlinear Gibbs measure dμ = e^{−D_K} dμ₀ / z.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, hs_norm, trace_norm_herm, CMat, C64};
use crate::rng::{map_shards, StreamRng};
use crate::spectral::{schatten_trace, shift_matrix, InteractionSpec, ModeBasis};

/// Coefficients α_j of u = Σ α_j u_j.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub alpha: Vec<C64>,
}

impl FieldSample {
    pub fn norm_sqr(&self) -> f64 {
        self.alpha.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Scalar Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Matrix-valued Monte Carlo estimate with entrywise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimate {
    pub mean: CMat,
    /// jackknife errors of |entry| components: sqrt(var re + var im)
    pub stderr: DMatrix<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

impl MatrixEstimate {
    /// Frobenius norm of the entrywise errors.
    pub fn aggregate_stderr(&self) -> f64 {
        self.stderr.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// Independent real and imaginary parts with variance 1/(2λ_j) each.
pub fn sample_gaussian<R: Rng + ?Sized>(basis: &ModeBasis, rng: &mut R) -> FieldSample {
    let alpha = basis
        .eigenvalues
        .iter()
        .map(|&l| {
            let s = (0.5 / l).sqrt();
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            c(s * x, s * y)
        })
        .collect();
    FieldSample { alpha }
}

fn check_square(basis: &ModeBasis, a: &CMat) -> Result<()> {
    let k = basis.dim();
    if a.nrows() != k || a.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, got: a.nrows().max(a.ncols()) });
    }
    Ok(())
}

/// M^A[u] = ⟨u, A u⟩ − Tr[A h⁻¹].
pub fn renorm_observable(basis: &ModeBasis, sample: &FieldSample, a: &CMat) -> Result<C64> {
    check_square(basis, a)?;
    if sample.alpha.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: sample.alpha.len() });
    }
    let k = basis.dim();
    let mut m = C64::new(0.0, 0.0);
    for p in 0..k {
        for q in 0..k {
            m += sample.alpha[p].conj() * a[(p, q)] * sample.alpha[q];
        }
        m -= a[(p, p)] / basis.eigenvalues[p];
    }
    Ok(m)
}

/// Precomputed evaluator of D_K[u] = ½ Σ_k ŵ(k) |M^{e_k}[u]|².
#[derive(Debug, Clone)]
pub struct DkEvaluator {
    terms: Vec<(f64, Vec<(usize, usize)>, f64)>,
    dim: usize,
}

impl DkEvaluator {
    pub fn new(basis: &ModeBasis, interaction: &InteractionSpec) -> Result<Self> {
        if !basis.is_torus() {
            return Err(Error::UnsupportedBasis);
        }
        interaction.check_dim(basis.spatial_dim())?;
        let trace_hinv: f64 = basis.eigenvalues.iter().map(|l| 1.0 / l).sum();
        let mut terms = Vec::new();
        for (k, w) in interaction.support() {
            let mut pairs = Vec::new();
            for q in 0..basis.dim() {
                let target: Vec<i64> = basis.labels[q].iter().zip(k).map(|(a, b)| a + b).collect();
                if let Some(p) = basis.index_of(&target) {
                    pairs.push((p, q));
                }
            }
            let sub = if k.iter().all(|&x| x == 0) { trace_hinv } else { 0.0 };
            if !pairs.is_empty() {
                terms.push((w, pairs, sub));
            }
        }
        Ok(DkEvaluator { terms, dim: basis.dim() })
    }

    pub fn eval(&self, alpha: &[C64]) -> f64 {
        debug_assert_eq!(alpha.len(), self.dim);
        let mut d = 0.0;
        for (w, pairs, sub) in &self.terms {
            let mut m = C64::new(-sub, 0.0);
            for &(p, q) in pairs {
                m += alpha[p].conj() * alpha[q];
            }
            d += 0.5 * w * m.norm_sqr();
        }
        d
    }
}

/// D_K[u] for one sample.
pub fn renorm_interaction(basis: &ModeBasis, sample: &FieldSample, interaction: &InteractionSpec) -> Result<f64> {
    Ok(DkEvaluator::new(basis, interaction)?.eval(&sample.alpha))
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParam("need at least 2 samples".into()));
    }
    Ok(())
}

/// z = ∫ e^{−D_K} dμ₀ by plain Monte Carlo.
pub fn estimate_z(basis: &ModeBasis, interaction: &InteractionSpec, n: usize, seed: u64) -> Result<MCEstimate> {
    check_n(n)?;
    let dk = DkEvaluator::new(basis, interaction)?;
    let parts = map_shards(seed, n, |rng, len| {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let w = (-dk.eval(&sample_gaussian(basis, rng).alpha)).exp();
            s += w;
            s2 += w * w;
        }
        (s, s2)
    });
    let (s, s2) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(MCEstimate { mean, stderr: (var / nf).sqrt(), n_samples: n, seed })
}

pub const JACKKNIFE_BLOCKS: usize = 32;

/// Self-normalized importance-sampling estimate of E_μ[f] for a vector of
/// real observables, with 32-block jackknife errors. Samples are drawn from
/// μ₀ and weighted by e^{−D_K}.
pub fn classical_expectation<F>(basis: &ModeBasis, interaction: &InteractionSpec, n: usize, seed: u64, n_obs: usize, f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[C64], &mut [f64]) + Sync,
{
    check_n(n)?;
    let dk = DkEvaluator::new(basis, interaction)?;
    let blocks = JACKKNIFE_BLOCKS.min(n);
    let shard = crate::rng::SHARD_SIZE;
    // per block: Σw and Σw·f
    let parts = map_shards(seed, n, |rng: &mut StreamRng, len| {
        let mut acc: Vec<(usize, f64, Vec<f64>)> = Vec::new();
        let mut buf = vec![0.0; n_obs];
        let start = rng.get_stream() as usize * shard;
        for j in 0..len {
            let b = (start + j) * blocks / n;
            if acc.last().map_or(true, |a| a.0 != b) {
                acc.push((b, 0.0, vec![0.0; n_obs]));
            }
            let s = sample_gaussian(basis, rng);
            let w = (-dk.eval(&s.alpha)).exp();
            f(&s.alpha, &mut buf);
            let slot = acc.last_mut().expect("pushed above");
            slot.1 += w;
            for (t, v) in slot.2.iter_mut().zip(&buf) {
                *t += w * v;
            }
        }
        acc
    });
    let mut bw = vec![0.0; blocks];
    let mut bf = vec![vec![0.0; n_obs]; blocks];
    for part in parts {
        for (b, w, fs) in part {
            bw[b] += w;
            for (t, v) in bf[b].iter_mut().zip(&fs) {
                *t += v;
            }
        }
    }
    let tw: f64 = bw.iter().sum();
    let tf: Vec<f64> = (0..n_obs).map(|i| bf.iter().map(|b| b[i]).sum()).collect();
    let mean: Vec<f64> = tf.iter().map(|v| v / tw).collect();
    let bn = blocks as f64;
    let mut stderr = vec![0.0; n_obs];
    for i in 0..n_obs {
        let loo: Vec<f64> = (0..blocks).map(|b| (tf[i] - bf[b][i]) / (tw - bw[b])).collect();
        let avg = loo.iter().sum::<f64>() / bn;
        let var = (bn - 1.0) / bn * loo.iter().map(|x| (x - avg).powi(2)).sum::<f64>();
        stderr[i] = var.sqrt();
    }
    Ok((mean, stderr))
}

/// γ^{(k)}_μ = ∫ |u^{⊗k}⟩⟨u^{⊗k}| dμ, k ∈ {1, 2}, as a K^k × K^k matrix
/// (pair index i₁K + i₂ for k = 2).
pub fn classical_dm(basis: &ModeBasis, interaction: &InteractionSpec, k: usize, n: usize, seed: u64) -> Result<MatrixEstimate> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidParam(format!("density-matrix order {k} not in 1..=2")));
    }
    let kk = basis.dim().pow(k as u32);
    let (mean, err) = classical_expectation(basis, interaction, n, seed, 2 * kk * kk, |alpha, out| {
        let v: Vec<C64> = if k == 1 {
            alpha.to_vec()
        } else {
            alpha.iter().flat_map(|a| alpha.iter().map(move |b| a * b)).collect()
        };
        for i in 0..kk {
            for j in 0..kk {
                let z = v[i] * v[j].conj();
                out[2 * (i * kk + j)] = z.re;
                out[2 * (i * kk + j) + 1] = z.im;
            }
        }
    })?;
    let m = CMat::from_fn(kk, kk, |i, j| c(mean[2 * (i * kk + j)], mean[2 * (i * kk + j) + 1]));
    let e = DMatrix::from_fn(kk, kk, |i, j| err[2 * (i * kk + j)].hypot(err[2 * (i * kk + j) + 1]));
    Ok(MatrixEstimate { mean: m, stderr: e, n_samples: n, seed })
}

/// ∫ M^{Id} dμ = ∫ (‖u‖² − Tr h⁻¹) dμ.
pub fn relative_number(basis: &ModeBasis, interaction: &InteractionSpec, n: usize, seed: u64) -> Result<MCEstimate> {
    let tr: f64 = basis.eigenvalues.iter().map(|l| 1.0 / l).sum();
    let (m, e) = classical_expectation(basis, interaction, n, seed, 1, |alpha, out| {
        out[0] = alpha.iter().map(|a| a.norm_sqr()).sum::<f64>() - tr;
    })?;
    Ok(MCEstimate { mean: m[0], stderr: e[0], n_samples: n, seed })
}

/// Tr[A h⁻¹ B* h⁻¹], the Gaussian value of E[M^A conj(M^B)].
pub fn exact_gaussian_covariance(basis: &ModeBasis, a: &CMat, b: &CMat) -> Result<C64> {
    check_square(basis, a)?;
    check_square(basis, b)?;
    let l = &basis.eigenvalues;
    let mut s = C64::new(0.0, 0.0);
    for p in 0..basis.dim() {
        for q in 0..basis.dim() {
            s += a[(p, q)] * b[(p, q)].conj() / (l[p] * l[q]);
        }
    }
    Ok(s)
}

/// ⟨D_K⟩_{μ₀} = ½ Σ_k ŵ(k) Tr[e_k h⁻¹ e_k* h⁻¹].
pub fn mean_dk_exact(basis: &ModeBasis, interaction: &InteractionSpec) -> Result<f64> {
    if !basis.is_torus() {
        return Err(Error::UnsupportedBasis);
    }
    let mut s = 0.0;
    for (k, w) in interaction.support() {
        let e = shift_matrix(basis, k)?;
        s += 0.5 * w * exact_gaussian_covariance(basis, &e, &e)?.re;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeDmReport {
    pub trace_norm: f64,
    pub bound: f64,
    pub aggregate_stderr: f64,
    pub z: f64,
    pub pass: bool,
}

/// tr|γ_μ^{(1)} − h⁻¹| against z^{−1/2} ‖h⁻¹‖_{S²} plus 4 aggregate errors.
pub fn relative_dm_check(basis: &ModeBasis, interaction: &InteractionSpec, n: usize, seed: u64) -> Result<RelativeDmReport> {
    let g = classical_dm(basis, interaction, 1, n, seed)?;
    let z = estimate_z(basis, interaction, n, seed)?;
    let hinv = crate::linalg::diag_c(&basis.eigenvalues.iter().map(|l| 1.0 / l).collect::<Vec<_>>());
    let diff = crate::linalg::hermitian_part(&(&g.mean - hinv));
    let tn = trace_norm_herm(&diff)?;
    let agg = g.aggregate_stderr();
    // trace norm ≤ √K · HS norm converts the entrywise error budget
    let noise = 4.0 * (basis.dim() as f64).sqrt() * agg;
    let bound = z.mean.powf(-0.5) * schatten_trace(basis, 2.0).sqrt();
    Ok(RelativeDmReport { trace_norm: tn, bound, aggregate_stderr: agg, z: z.mean, pass: tn <= bound + noise })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyReport {
    pub cutoffs: Vec<f64>,
    pub dims: Vec<usize>,
    /// E|D_{K_{i+1}} − D_{K_i}|
    pub mean_abs_diff: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Σ_{j > K_i} λ_j^{−2} computed on the largest basis
    pub tail_budget: Vec<f64>,
    pub min_dk: f64,
    pub decreasing: bool,
}

/// L¹-Cauchy diagnostic for nested torus cutoffs with common samples drawn
/// on the largest basis and restricted to the smaller ones.
pub fn cauchy_diagnostic(d: usize, kappa: f64, cutoffs: &[f64], interaction: &InteractionSpec, n: usize, seed: u64) -> Result<CauchyReport> {
    check_n(n)?;
    if cutoffs.len() < 2 || cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam("need at least two increasing cutoffs".into()));
    }
    let big = crate::spectral::build_torus_basis(d, kappa, *cutoffs.last().expect("nonempty"))?;
    let subs: Vec<ModeBasis> = cutoffs.iter().map(|&c| crate::spectral::build_torus_basis(d, kappa, c)).collect::<Result<_>>()?;
    let evals: Vec<DkEvaluator> = subs.iter().map(|b| DkEvaluator::new(b, interaction)).collect::<Result<_>>()?;
    let maps: Vec<Vec<usize>> = subs
        .iter()
        .map(|b| b.labels.iter().map(|l| big.index_of(l).expect("nested bases")).collect())
        .collect();
    let m = cutoffs.len() - 1;
    let parts = map_shards(seed, n, |rng, len| {
        let mut s = vec![0.0; m];
        let mut s2 = vec![0.0; m];
        let mut min_d = f64::INFINITY;
        let mut buf: Vec<C64> = Vec::new();
        for _ in 0..len {
            let u = sample_gaussian(&big, rng);
            let mut vals = Vec::with_capacity(cutoffs.len());
            for (e, map) in evals.iter().zip(&maps) {
                buf.clear();
                buf.extend(map.iter().map(|&i| u.alpha[i]));
                let v = e.eval(&buf);
                min_d = min_d.min(v);
                vals.push(v);
            }
            for i in 0..m {
                let x = (vals[i + 1] - vals[i]).abs();
                s[i] += x;
                s2[i] += x * x;
            }
        }
        (s, s2, min_d)
    });
    let nf = n as f64;
    let mut s = vec![0.0; m];
    let mut s2 = vec![0.0; m];
    let mut min_dk = f64::INFINITY;
    for (a, b, md) in parts {
        for i in 0..m {
            s[i] += a[i];
            s2[i] += b[i];
        }
        min_dk = min_dk.min(md);
    }
    let mean: Vec<f64> = s.iter().map(|x| x / nf).collect();
    let stderr: Vec<f64> = (0..m).map(|i| (((s2[i] - nf * mean[i] * mean[i]) / (nf - 1.0)).max(0.0) / nf).sqrt()).collect();
    let tail_budget = subs[..m]
        .iter()
        .map(|b| big.eigenvalues[b.dim()..].iter().map(|l| l.powi(-2)).sum())
        .collect();
    let decreasing = mean.windows(2).all(|w| w[1] < w[0]);
    Ok(CauchyReport {
        cutoffs: cutoffs.to_vec(),
        dims: subs.iter().map(|b| b.dim()).collect(),
        mean_abs_diff: mean,
        stderr,
        tail_budget,
        min_dk,
        decreasing,
    })
}

/// Convenience: Frobenius distance between two matrices.
pub fn hs_distance(a: &CMat, b: &CMat) -> f64 {
    hs_norm(&(a - b))
}
