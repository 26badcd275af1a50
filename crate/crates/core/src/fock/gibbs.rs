//! Exact Gibbs states on the truncated Fock space and quasi-free closed forms.

use rayon::prelude::*;
use serde::Serialize;

use super::{enumerate_fock_with_budget, sym_projector, FockModel, FockOperator, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::linalg::{herm_eig, is_hermitian, trace_prod, CMat, C64};
use crate::special::log_sum_exp;
use crate::spectral::ModeBasis;

/// Boundary weight at which the adaptive n_max search stops.
pub const BOUNDARY_TARGET: f64 = 1e-10;
/// Boundary weight above which an ensemble is flagged as truncation-affected.
pub const BOUNDARY_WARN: f64 = 1e-8;

/// One connected block of the Hamiltonian's sparsity pattern.
#[derive(Debug, Clone)]
pub struct GibbsBlock {
    /// global state indices, ascending
    pub states: Vec<usize>,
    pub energies: Vec<f64>,
    pub vectors: CMat,
    /// block of the density matrix, ρ_{nn'} for n, n' in `states`
    pub rho: CMat,
}

#[derive(Debug, Clone)]
pub struct GibbsEnsemble {
    pub model: FockModel,
    pub lambda: f64,
    pub blocks: Vec<GibbsBlock>,
    /// state -> (block, position in block)
    locate: Vec<(u32, u32)>,
    pub e_min: f64,
    pub log_partition: f64,
    pub boundary_weight: f64,
    pub truncation_warning: bool,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// Γ = e^{−λH}/𝒵, computed block by block.
pub fn gibbs(model: &FockModel, h: &FockOperator, lambda: f64) -> Result<GibbsEnsemble> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidParam(format!("λ = {lambda} must be positive")));
    }
    if !h.hermitian {
        return Err(Error::InvalidParam("Gibbs state needs a Hermitian operator".into()));
    }
    let dim = model.dim();
    if h.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: h.dim() });
    }
    let mut parent: Vec<u32> = (0..dim as u32).collect();
    for i in 0..dim {
        for (j, _) in h.matrix.row(i) {
            let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
            if a != b {
                parent[a.max(b) as usize] = a.min(b);
            }
        }
    }
    let mut root_block = vec![u32::MAX; dim];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut locate = vec![(0u32, 0u32); dim];
    for i in 0..dim {
        let r = find(&mut parent, i as u32) as usize;
        if root_block[r] == u32::MAX {
            root_block[r] = members.len() as u32;
            members.push(Vec::new());
        }
        let b = root_block[r];
        locate[i] = (b, members[b as usize].len() as u32);
        members[b as usize].push(i);
    }
    let eig: Vec<(Vec<f64>, CMat)> = members
        .par_iter()
        .map(|states| {
            let n = states.len();
            if n == 1 {
                let s = states[0];
                return Ok((vec![h.matrix.get(s, s).re], CMat::identity(1, 1)));
            }
            let mut m = CMat::zeros(n, n);
            for (a, &s) in states.iter().enumerate() {
                for (t, v) in h.matrix.row(s) {
                    m[(a, locate[t].1 as usize)] = v;
                }
            }
            herm_eig(&m)
        })
        .collect::<Result<_>>()?;
    let e_min = eig.iter().flat_map(|(e, _)| e.iter().copied()).fold(f64::INFINITY, f64::min);
    let exponents: Vec<f64> = eig.iter().flat_map(|(e, _)| e.iter().map(|&x| -lambda * (x - e_min))).collect();
    let log_shifted = log_sum_exp(&exponents);
    let log_partition = -lambda * e_min + log_shifted;
    let blocks: Vec<GibbsBlock> = members
        .into_par_iter()
        .zip(eig)
        .map(|(states, (energies, vectors))| {
            let n = states.len();
            let mut scaled = vectors.clone();
            for (j, &e) in energies.iter().enumerate() {
                let p = (-lambda * (e - e_min) - log_shifted).exp();
                for i in 0..n {
                    scaled[(i, j)] *= p;
                }
            }
            let rho = &scaled * vectors.adjoint();
            GibbsBlock { states, energies, vectors, rho }
        })
        .collect();
    let mut ens = GibbsEnsemble { model: model.clone(), lambda, blocks, locate, e_min, log_partition, boundary_weight: 0.0, truncation_warning: false };
    let bw: f64 = model.sector(model.n_max).map(|s| ens.rho_entry(s, s).re).sum();
    ens.boundary_weight = bw.clamp(0.0, 1.0);
    ens.truncation_warning = ens.boundary_weight > BOUNDARY_WARN;
    Ok(ens)
}

/// Adaptive choice of n_max for a given coupling.
#[derive(Debug, Clone, Serialize)]
pub struct NmaxPolicy {
    /// overrides ceil(8/(λλ_min))
    pub start: Option<usize>,
    pub growth: f64,
    pub target: f64,
    pub budget: usize,
    pub max_rounds: usize,
}

impl Default for NmaxPolicy {
    fn default() -> Self {
        NmaxPolicy { start: None, growth: 2.0, target: BOUNDARY_TARGET, budget: DEFAULT_BUDGET, max_rounds: 12 }
    }
}

impl NmaxPolicy {
    pub fn initial(&self, lambda: f64, lambda_min: f64) -> usize {
        self.start.unwrap_or_else(|| (8.0 / (lambda * lambda_min)).ceil().max(1.0) as usize)
    }
}

/// Grows n_max until the boundary weight drops below the policy target. If
/// the next size would exceed the budget, the last ensemble is returned with
/// its truncation flag set as appropriate.
pub fn gibbs_auto<F>(basis: &ModeBasis, lambda: f64, policy: &NmaxPolicy, build: F) -> Result<GibbsEnsemble>
where
    F: Fn(&FockModel) -> Result<FockOperator>,
{
    let mut n_max = policy.initial(lambda, basis.lambda_min());
    let mut last: Option<GibbsEnsemble> = None;
    for _ in 0..policy.max_rounds.max(1) {
        let model = match enumerate_fock_with_budget(basis, n_max, policy.budget) {
            Ok(m) => m,
            Err(e @ Error::TooLarge { .. }) => return last.ok_or(e),
            Err(e) => return Err(e),
        };
        let h = build(&model)?;
        let ens = gibbs(&model, &h, lambda)?;
        if ens.boundary_weight <= policy.target {
            return Ok(ens);
        }
        last = Some(ens);
        n_max = ((n_max as f64 * policy.growth).ceil() as usize).max(n_max + 1);
    }
    Ok(last.expect("at least one round"))
}

/// Applies a_r (annihilation) in place, returning the amplitude, or None on zero.
#[inline]
fn lower(buf: &mut [u16], r: usize) -> Option<f64> {
    if buf[r] == 0 {
        return None;
    }
    let a = (buf[r] as f64).sqrt();
    buf[r] -= 1;
    Some(a)
}

#[inline]
fn raise(buf: &mut [u16], p: usize) -> f64 {
    buf[p] += 1;
    (buf[p] as f64).sqrt()
}

const CHUNK: usize = 512;

/// Σ_s f(·, s) over 0..dim in fixed chunks summed in order, so results do
/// not depend on thread scheduling.
fn chunked_sum(dim: usize, n: usize, f: impl Fn(&mut CMat, usize) + Sync) -> CMat {
    let parts: Vec<CMat> = (0..dim.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut g = CMat::zeros(n, n);
            for s in c * CHUNK..((c + 1) * CHUNK).min(dim) {
                f(&mut g, s);
            }
            g
        })
        .collect();
    parts.into_iter().fold(CMat::zeros(n, n), |a, b| a + b)
}

/// Γ^{(k)} for k ∈ {1, 2} of a state given through ρ(n, n′) = ⟨n|ρ|n′⟩.
/// k = 1: Γ_{ij} = tr[a†_j a_i Γ]; k = 2: Γ_{(rs),(pq)} = ½ tr[a†_p a†_q a_s a_r Γ].
fn reduced_dm_with<F>(model: &FockModel, k: usize, rho: F) -> Result<CMat>
where
    F: Fn(usize, usize) -> C64 + Sync,
{
    let kk = model.modes();
    let dim = model.dim();
    match k {
        1 => {
            Ok(chunked_sum(dim, kk, |g, s| {
                let mut buf = vec![0u16; kk];
                for i in 0..kk {
                    for j in 0..kk {
                        buf.copy_from_slice(model.occupation(s));
                        let Some(a1) = lower(&mut buf, i) else { continue };
                        let a2 = raise(&mut buf, j);
                        let t = model.index(&buf).expect("number conserving");
                        g[(i, j)] += rho(s, t) * (a1 * a2);
                    }
                }
            }))
        }
        2 => {
            let n2 = kk * kk;
            Ok(chunked_sum(dim, n2, |g, s| {
                let mut buf = vec![0u16; kk];
                for r in 0..kk {
                    for sidx in 0..kk {
                        for p in 0..kk {
                            for q in 0..kk {
                                buf.copy_from_slice(model.occupation(s));
                                let Some(a1) = lower(&mut buf, r) else { continue };
                                let Some(a2) = lower(&mut buf, sidx) else { continue };
                                let a3 = raise(&mut buf, q);
                                let a4 = raise(&mut buf, p);
                                let t = model.index(&buf).expect("number conserving");
                                g[(r * kk + sidx, p * kk + q)] += rho(s, t) * (0.5 * a1 * a2 * a3 * a4);
                            }
                        }
                    }
                }
            }))
        }
        _ => Err(Error::InvalidParam(format!("reduced density matrix order {k} not in {{1, 2}}"))),
    }
}

/// Γ^{(k)} of a dense Fock-space density matrix.
pub fn reduced_dm_dense(model: &FockModel, rho: &CMat, k: usize) -> Result<CMat> {
    if rho.nrows() != model.dim() || rho.ncols() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: rho.nrows() });
    }
    reduced_dm_with(model, k, |n, m| rho[(n, m)])
}

impl GibbsEnsemble {
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// ⟨n|Γ|n′⟩.
    pub fn rho_entry(&self, n: usize, m: usize) -> C64 {
        let (bn, ln) = self.locate[n];
        let (bm, lm) = self.locate[m];
        if bn != bm {
            return C64::new(0.0, 0.0);
        }
        self.blocks[bn as usize].rho[(ln as usize, lm as usize)]
    }

    /// Eigenvalues p_m = e^{−λ(E_m − E_min)}/Σ of Γ.
    pub fn probabilities(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.energies.iter().map(|&e| (-self.lambda * e - self.log_partition).exp()))
            .collect()
    }

    /// Von Neumann entropy −tr Γ log Γ.
    pub fn entropy(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.energies.iter())
            .map(|&e| {
                let lp = -self.lambda * e - self.log_partition;
                -lp.exp() * lp
            })
            .sum()
    }

    /// tr(OΓ) = Σ_{n,n′} O_{n′n} ρ_{nn′}.
    pub fn expect(&self, op: &FockOperator) -> C64 {
        let rows: Vec<C64> = (0..self.dim())
            .into_par_iter()
            .map(|t| op.matrix.row(t).map(|(s, v)| v * self.rho_entry(s, t)).sum::<C64>())
            .collect();
        rows.iter().sum()
    }

    pub fn mean_number(&self) -> f64 {
        (0..self.dim()).map(|s| self.rho_entry(s, s).re * self.model.total(s) as f64).sum()
    }

    /// ⟨dΓ(h)⟩.
    pub fn mean_kinetic(&self) -> f64 {
        (0..self.dim()).map(|s| self.rho_entry(s, s).re * self.model.free_energy_of(s)).sum()
    }

    /// ⟨(𝒩 − c)^m⟩ for m = 1..=4.
    pub fn number_moments(&self, reference_mean: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for s in 0..self.dim() {
            let p = self.rho_entry(s, s).re;
            let x = self.model.total(s) as f64 - reference_mean;
            let mut xp = 1.0;
            for o in out.iter_mut() {
                xp *= x;
                *o += p * xp;
            }
        }
        out
    }

    pub fn reduced_dm(&self, k: usize) -> Result<CMat> {
        reduced_dm_with(&self.model, k, |n, m| self.rho_entry(n, m))
    }

    /// Full density matrix (small models only).
    pub fn density_matrix(&self) -> CMat {
        let dim = self.dim();
        let mut m = CMat::zeros(dim, dim);
        for b in &self.blocks {
            for (a, &s) in b.states.iter().enumerate() {
                for (c, &t) in b.states.iter().enumerate() {
                    m[(s, t)] = b.rho[(a, c)];
                }
            }
        }
        m
    }

    /// ℋ(Γ, Γ₀) against the diagonal reference e^{−λdΓ(h)}/𝒵₀, given log 𝒵₀.
    pub fn relative_entropy_to_free(&self, log_z0: f64) -> f64 {
        -self.entropy() + self.lambda * self.mean_kinetic() + log_z0
    }
}

/// log Σ_{n in the model} e^{−λ Σ n_jλ_j}.
pub fn free_truncated_log_partition(model: &FockModel, lambda: f64) -> f64 {
    let ex: Vec<f64> = (0..model.dim()).map(|s| -lambda * model.free_energy_of(s)).collect();
    log_sum_exp(&ex)
}

fn check_lambda(basis: &ModeBasis, lambda: f64) -> Result<()> {
    if !(lambda * basis.lambda_min() > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParam(format!("λλ_min must be positive, got λ = {lambda}")));
    }
    Ok(())
}

fn occupations(basis: &ModeBasis, lambda: f64) -> Vec<f64> {
    basis.eigenvalues.iter().map(|&l| 1.0 / (lambda * l).exp_m1()).collect()
}

/// Closed-form Γ₀^{(k)}: (e^{λh} − 1)^{−1} for k = 1, P_s(γ⊗γ)P_s for k = 2.
pub fn quasifree_dm_closed(basis: &ModeBasis, lambda: f64, k: usize) -> Result<CMat> {
    check_lambda(basis, lambda)?;
    let g = crate::linalg::diag_c(&occupations(basis, lambda));
    match k {
        1 => Ok(g),
        2 => {
            let ps = sym_projector(basis.dim());
            Ok(&ps * g.kronecker(&g) * &ps)
        }
        _ => Err(Error::InvalidParam(format!("reduced density matrix order {k} not in {{1, 2}}"))),
    }
}

/// log 𝒵₀ = −Σ_j log(1 − e^{−λλ_j}).
pub fn quasifree_log_partition(basis: &ModeBasis, lambda: f64) -> Result<f64> {
    check_lambda(basis, lambda)?;
    Ok(-basis.eigenvalues.iter().map(|&l| (-(-lambda * l).exp_m1()).ln()).sum::<f64>())
}

pub fn quasifree_mean_number(basis: &ModeBasis, lambda: f64) -> Result<f64> {
    check_lambda(basis, lambda)?;
    Ok(occupations(basis, lambda).iter().sum())
}

/// λ²⟨|dΓ(A) − ⟨dΓ(A)⟩₀|²⟩₀ = λ²(tr[A²γ] + tr[AγAγ]) for Hermitian A.
pub fn quasifree_variance(basis: &ModeBasis, lambda: f64, a: &CMat) -> Result<f64> {
    check_lambda(basis, lambda)?;
    let k = basis.dim();
    if a.nrows() != k || a.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, got: a.nrows() });
    }
    if !is_hermitian(a, 1e-12) {
        return Err(Error::InvalidParam("variance needs a Hermitian one-body operator".into()));
    }
    let g = crate::linalg::diag_c(&occupations(basis, lambda));
    let ag = a * &g;
    let v = trace_prod(&(a * a), &g) + trace_prod(&ag, &ag);
    Ok(lambda * lambda * v.re)
}
