//! Truncated bosonic Fock space over a finite mode basis: occupation-number
//! states with Σ n_j ≤ n_max, second quantization, the renormalized
//! interaction and exact Gibbs states.

mod coherent;
mod gibbs;
mod sparse;

pub use coherent::{definetti_residual, husimi, husimi_mass, husimi_unchecked, DeFinettiReport};
pub use gibbs::{
    free_truncated_log_partition, gibbs, gibbs_auto, quasifree_dm_closed, quasifree_log_partition, quasifree_mean_number,
    quasifree_variance, reduced_dm_dense, GibbsBlock, GibbsEnsemble, NmaxPolicy, BOUNDARY_TARGET, BOUNDARY_WARN,
};
pub use sparse::SparseC;

use crate::error::{Error, Result};
use crate::linalg::{is_hermitian, CMat, C64};
use crate::spectral::{cos_matrix, sin_matrix, InteractionSpec, ModeBasis};

/// Default cap on the Fock dimension.
pub const DEFAULT_BUDGET: usize = 20_000;

#[derive(Debug, Clone)]
pub struct FockModel {
    pub basis: ModeBasis,
    pub n_max: usize,
    k: usize,
    /// occupation vectors, row-major with stride k
    occ: Vec<u16>,
    /// binom[n][m] = C(n, m) for n ≤ n_max + k, m ≤ k
    binom: Vec<Vec<u64>>,
    /// sector_start[N] = number of states with total < N
    sector_start: Vec<usize>,
}

/// Number of occupation vectors in ℕ^k with total ≤ n_max.
pub fn fock_dimension(k: usize, n_max: usize) -> u128 {
    crate::special::binomial((n_max + k) as u64, k as u64)
}

pub fn enumerate_fock(basis: &ModeBasis, n_max: usize) -> Result<FockModel> {
    enumerate_fock_with_budget(basis, n_max, DEFAULT_BUDGET)
}

/// States ordered by total number, then lexicographically.
pub fn enumerate_fock_with_budget(basis: &ModeBasis, n_max: usize, budget: usize) -> Result<FockModel> {
    let k = basis.dim();
    if k == 0 {
        return Err(Error::EmptyBasis);
    }
    if n_max > u16::MAX as usize {
        return Err(Error::InvalidParam(format!("n_max = {n_max} exceeds {}", u16::MAX)));
    }
    let dim = fock_dimension(k, n_max);
    if dim > budget as u128 {
        return Err(Error::TooLarge { dim, budget });
    }
    let dim = dim as usize;
    let binom: Vec<Vec<u64>> = (0..=n_max + k)
        .map(|n| (0..=k).map(|m| crate::special::binomial(n as u64, m as u64).min(u64::MAX as u128) as u64).collect())
        .collect();
    let mut sector_start = Vec::with_capacity(n_max + 2);
    for n in 0..=n_max + 1 {
        // C(n − 1 + k, k) states have total < n
        sector_start.push(if n == 0 { 0 } else { binom[n - 1 + k][k] as usize });
    }
    let mut occ = Vec::with_capacity(dim * k);
    let mut cur = vec![0u16; k];
    for n in 0..=n_max {
        compositions(n, 0, &mut cur, &mut occ);
    }
    debug_assert_eq!(occ.len(), dim * k);
    Ok(FockModel { basis: basis.clone(), n_max, k, occ, binom, sector_start })
}

/// Appends all vectors with the given total in lexicographic order.
fn compositions(remaining: usize, pos: usize, cur: &mut [u16], out: &mut Vec<u16>) {
    let k = cur.len();
    if pos == k - 1 {
        cur[pos] = remaining as u16;
        out.extend_from_slice(cur);
        return;
    }
    for v in 0..=remaining {
        cur[pos] = v as u16;
        compositions(remaining - v, pos + 1, cur, out);
    }
}

impl FockModel {
    pub fn dim(&self) -> usize {
        self.occ.len() / self.k
    }

    pub fn modes(&self) -> usize {
        self.k
    }

    pub fn occupation(&self, i: usize) -> &[u16] {
        &self.occ[i * self.k..(i + 1) * self.k]
    }

    pub fn total(&self, i: usize) -> usize {
        self.occupation(i).iter().map(|&x| x as usize).sum()
    }

    /// Inverse of the state ordering; `None` if the total exceeds n_max.
    pub fn index(&self, n: &[u16]) -> Option<usize> {
        if n.len() != self.k {
            return None;
        }
        let total: usize = n.iter().map(|&x| x as usize).sum();
        if total > self.n_max {
            return None;
        }
        let mut idx = self.sector_start[total];
        let mut rem = total;
        for (j, &nj) in n.iter().enumerate().take(self.k - 1) {
            let m = self.k - j - 1;
            let nj = nj as usize;
            // vectors whose j-th entry is < nj, given the prefix
            idx += (self.binom[rem + m][m] - self.binom[rem - nj + m][m]) as usize;
            rem -= nj;
        }
        Some(idx)
    }

    /// Range of state indices with total exactly `n`.
    pub fn sector(&self, n: usize) -> std::ops::Range<usize> {
        self.sector_start[n]..self.sector_start[n + 1]
    }

    /// Σ_j n_j λ_j for state `i`.
    pub fn free_energy_of(&self, i: usize) -> f64 {
        self.occupation(i).iter().zip(&self.basis.eigenvalues).map(|(&n, &l)| n as f64 * l).sum()
    }
}

/// Operator on the truncated Fock space, stored sparse.
#[derive(Debug, Clone)]
pub struct FockOperator {
    pub matrix: SparseC,
    pub hermitian: bool,
}

impl FockOperator {
    pub fn new(matrix: SparseC) -> Self {
        let hermitian = matrix.hermiticity_defect() <= 1e-12;
        FockOperator { matrix, hermitian }
    }

    pub fn zero(dim: usize) -> Self {
        FockOperator { matrix: SparseC::zeros(dim), hermitian: true }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn to_dense(&self) -> CMat {
        self.matrix.to_dense()
    }

    pub fn add(&self, other: &FockOperator) -> Self {
        Self::new(self.matrix.add(&other.matrix))
    }

    pub fn scale(&self, s: f64) -> Self {
        FockOperator { matrix: self.matrix.scale(C64::new(s, 0.0)), hermitian: self.hermitian }
    }

    pub fn matmul(&self, other: &FockOperator) -> Self {
        Self::new(self.matrix.matmul(&other.matrix))
    }

    /// (M + M†)/2, flagged Hermitian.
    fn symmetrized(m: SparseC) -> Self {
        let h = m.axpby(C64::new(0.5, 0.0), &m.adjoint(), C64::new(0.5, 0.0));
        FockOperator { matrix: h, hermitian: true }
    }
}

/// dΓ(A) = Σ_{pq} A_{pq} a†_p a_q.
#[allow(non_snake_case)]
pub fn dGamma(model: &FockModel, a: &CMat) -> Result<FockOperator> {
    let k = model.k;
    if a.nrows() != k || a.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, got: a.nrows() });
    }
    let mut trip = Vec::new();
    let mut buf = vec![0u16; k];
    for s in 0..model.dim() {
        let n = model.occupation(s);
        for q in 0..k {
            if n[q] == 0 {
                continue;
            }
            for p in 0..k {
                let apq = a[(p, q)];
                if apq == C64::new(0.0, 0.0) {
                    continue;
                }
                buf.copy_from_slice(n);
                let mut amp = (buf[q] as f64).sqrt();
                buf[q] -= 1;
                buf[p] += 1;
                amp *= (buf[p] as f64).sqrt();
                let t = model.index(&buf).expect("number-conserving move stays in the model");
                trip.push((t as u32, s as u32, apq * amp));
            }
        }
    }
    let m = SparseC::from_triplets(model.dim(), trip);
    Ok(if is_hermitian(a, 1e-12) { FockOperator::symmetrized(m) } else { FockOperator::new(m) })
}

pub fn number_op(model: &FockModel) -> FockOperator {
    let d: Vec<f64> = (0..model.dim()).map(|i| model.total(i) as f64).collect();
    FockOperator { matrix: SparseC::diagonal(&d), hermitian: true }
}

/// dΓ(h) with h the diagonal one-body operator of the basis.
pub fn kinetic_op(model: &FockModel) -> FockOperator {
    let d: Vec<f64> = (0..model.dim()).map(|i| model.free_energy_of(i)).collect();
    FockOperator { matrix: SparseC::diagonal(&d), hermitian: true }
}

/// N₀^tr = Σ_p 1/(e^{λλ_p} − 1).
pub fn truncated_n0(basis: &ModeBasis, lambda: f64) -> f64 {
    basis.eigenvalues.iter().map(|&l| 1.0 / (lambda * l).exp_m1()).sum()
}

/// 𝕎^ren with the truncated counter-term N₀^tr.
pub fn renorm_interaction_op(model: &FockModel, interaction: &InteractionSpec, lambda: f64) -> Result<FockOperator> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParam(format!("λ = {lambda} must be positive")));
    }
    renorm_interaction_op_with(model, interaction, truncated_n0(&model.basis, lambda))
}

/// ½ Σ_k ŵ(k)[(dΓ(P cos P) − δ_{k0} c0)² + dΓ(P sin P)²] for an arbitrary
/// subtraction constant `c0`.
pub fn renorm_interaction_op_with(model: &FockModel, interaction: &InteractionSpec, c0: f64) -> Result<FockOperator> {
    if !model.basis.is_torus() {
        return Err(Error::UnsupportedBasis);
    }
    interaction.check_dim(model.basis.spatial_dim())?;
    let dim = model.dim();
    let mut acc = SparseC::zeros(dim);
    for (label, w) in interaction.support() {
        let cos = dGamma(model, &cos_matrix(&model.basis, label)?)?;
        let sin = dGamma(model, &sin_matrix(&model.basis, label)?)?;
        let mut cm = cos.matrix;
        if label.iter().all(|&x| x == 0) {
            cm = cm.axpby(C64::new(1.0, 0.0), &SparseC::identity(dim), C64::new(-c0, 0.0));
        }
        let term = cm.matmul(&cm).add(&sin.matrix.matmul(&sin.matrix));
        acc = acc.axpby(C64::new(1.0, 0.0), &term, C64::new(0.5 * w, 0.0));
    }
    Ok(FockOperator::symmetrized(acc))
}

/// H = dΓ(h) + λ𝕎^ren, so that the Gibbs state is e^{−λH}/𝒵.
pub fn hamiltonian(model: &FockModel, interaction: &InteractionSpec, lambda: f64) -> Result<FockOperator> {
    let kin = kinetic_op(model);
    if interaction.is_zero() {
        return Ok(kin);
    }
    let w = renorm_interaction_op(model, interaction, lambda)?;
    Ok(FockOperator::symmetrized(kin.matrix.axpby(C64::new(1.0, 0.0), &w.matrix, C64::new(lambda, 0.0))))
}

/// Orthogonal projector onto the symmetric subspace of ℂ^K ⊗ ℂ^K, index i·K + j.
pub fn sym_projector(k: usize) -> CMat {
    let mut p = CMat::zeros(k * k, k * k);
    for i in 0..k {
        for j in 0..k {
            p[(i * k + j, i * k + j)] += C64::new(0.5, 0.0);
            p[(i * k + j, j * k + i)] += C64::new(0.5, 0.0);
        }
    }
    p
}

/// P_s (A ⊗ 1) P_s.
pub fn sym_tensor_identity(a: &CMat) -> CMat {
    let k = a.nrows();
    let ps = sym_projector(k);
    let ai = a.kronecker(&CMat::identity(k, k));
    &ps * ai * &ps
}
