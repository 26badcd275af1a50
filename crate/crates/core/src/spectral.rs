//! Truncated one-body spectral models.
//!
//! Torus bases are plane waves u_m(x) = e^{2πi m·x} on the unit torus with
//! eigenvalues |2πm|² + κ; grid bases are the lowest eigenpairs of a
//! Dirichlet finite-difference operator −d²/dx² + V + κ on [−R, R].

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, sym_eig, CMat, C64};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BasisKind {
    Torus { d: usize, kappa: f64 },
    Grid { half_width: f64, spacing: f64, points: Vec<f64>, potential: Vec<f64>, kappa: f64 },
}

#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub kind: BasisKind,
    /// torus: integer vectors m (momentum 2πm); grid: `[j]`
    pub labels: Vec<Vec<i64>>,
    pub eigenvalues: Vec<f64>,
    pub energy_cutoff: Option<f64>,
    /// grid only: column j is u_j at the nodes, Σ_i spacing·u_j(x_i)² = 1
    pub eigenvectors: Option<DMatrix<f64>>,
    index: HashMap<Vec<i64>, usize>,
}

/// Serializable view used by reports.
#[derive(Debug, Clone, Serialize)]
pub struct BasisSummary {
    pub kind: &'static str,
    pub d: usize,
    pub kappa: f64,
    pub cutoff: Option<f64>,
    pub eigenvalues: Vec<f64>,
}

impl ModeBasis {
    fn new(kind: BasisKind, labels: Vec<Vec<i64>>, eigenvalues: Vec<f64>, cutoff: Option<f64>, vecs: Option<DMatrix<f64>>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        ModeBasis { kind, labels, eigenvalues, energy_cutoff: cutoff, eigenvectors: vecs, index }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, BasisKind::Torus { .. })
    }

    pub fn kappa(&self) -> f64 {
        match self.kind {
            BasisKind::Torus { kappa, .. } | BasisKind::Grid { kappa, .. } => kappa,
        }
    }

    pub fn spatial_dim(&self) -> usize {
        match self.kind {
            BasisKind::Torus { d, .. } => d,
            BasisKind::Grid { .. } => 1,
        }
    }

    pub fn index_of(&self, label: &[i64]) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Single-mode model with eigenvalue `lambda1` (a d = 1 torus with only m = 0).
    pub fn single_mode(lambda1: f64) -> Result<Self> {
        build_torus_basis(1, lambda1, lambda1)
    }

    /// Abstract torus-kind basis with prescribed eigenvalues (sorted on input)
    /// and placeholder labels `[j]`; meant for quasi-free models without
    /// interaction.
    pub fn from_spectrum(eigenvalues: &[f64]) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptyBasis);
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParam("eigenvalues must be finite and positive".into()));
        }
        let mut vals = eigenvalues.to_vec();
        vals.sort_by(f64::total_cmp);
        let labels = (0..vals.len() as i64).map(|j| vec![j]).collect();
        Ok(ModeBasis::new(BasisKind::Torus { d: 1, kappa: vals[0] }, labels, vals, None, None))
    }

    /// Sub-basis keeping the modes with eigenvalue ≤ `cutoff` (torus only).
    pub fn restrict(&self, cutoff: f64) -> Result<Self> {
        let BasisKind::Torus { d, kappa } = self.kind else {
            return Err(Error::UnsupportedBasis);
        };
        let Some(own) = self.energy_cutoff else {
            return Err(Error::UnsupportedBasis);
        };
        build_torus_basis(d, kappa, cutoff.min(own))
    }

    pub fn summary(&self) -> BasisSummary {
        let (kind, d) = match self.kind {
            BasisKind::Torus { d, .. } => ("torus", d),
            BasisKind::Grid { .. } => ("grid", 1),
        };
        BasisSummary { kind, d, kappa: self.kappa(), cutoff: self.energy_cutoff, eigenvalues: self.eigenvalues.clone() }
    }
}

/// Plane-wave basis {m ∈ ℤ^d : |2πm|² + κ ≤ Λ_e}, ordered by eigenvalue.
pub fn build_torus_basis(d: usize, kappa: f64, cutoff: f64) -> Result<ModeBasis> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidParam(format!("torus dimension {d} not in 1..=3")));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParam(format!("kappa = {kappa} must be positive")));
    }
    if !(cutoff >= kappa) {
        return Err(Error::EmptyBasis);
    }
    let r = ((cutoff - kappa).sqrt() / (2.0 * PI)).floor() as i64;
    let mut modes: Vec<(f64, Vec<i64>)> = Vec::new();
    let mut m = vec![-r; d];
    loop {
        let k2: f64 = m.iter().map(|&x| (2.0 * PI * x as f64).powi(2)).sum();
        if k2 + kappa <= cutoff {
            modes.push((k2 + kappa, m.clone()));
        }
        // odometer over the cube [-r, r]^d
        let mut j = 0;
        while j < d {
            if m[j] < r {
                m[j] += 1;
                break;
            }
            m[j] = -r;
            j += 1;
        }
        if j == d {
            break;
        }
    }
    // ties: lexicographically larger label first, so +m precedes −m
    modes.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)));
    let (vals, labels): (Vec<f64>, Vec<Vec<i64>>) = modes.into_iter().unzip();
    Ok(ModeBasis::new(BasisKind::Torus { d, kappa }, labels, vals, Some(cutoff), None))
}

/// Lowest `k` eigenpairs of the Dirichlet operator −Δ_h + V + κ on the
/// `n_points` interior nodes x_i = −R + (i+1)·h, h = 2R/(n_points+1).
pub fn build_grid_basis(half_width: f64, n_points: usize, potential: impl Fn(f64) -> f64, kappa: f64, k: usize) -> Result<ModeBasis> {
    let h = grid_spacing(half_width, n_points)?;
    let values: Vec<f64> = (0..n_points).map(|i| potential(-half_width + (i + 1) as f64 * h)).collect();
    build_grid_basis_values(half_width, &values, kappa, k)
}

pub fn grid_spacing(half_width: f64, n_points: usize) -> Result<f64> {
    if n_points < 3 {
        return Err(Error::InvalidParam(format!("grid needs at least 3 points, got {n_points}")));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidParam(format!("half width {half_width} must be positive")));
    }
    Ok(2.0 * half_width / (n_points + 1) as f64)
}

pub fn grid_points(half_width: f64, n_points: usize) -> Result<Vec<f64>> {
    let h = grid_spacing(half_width, n_points)?;
    Ok((0..n_points).map(|i| -half_width + (i + 1) as f64 * h).collect())
}

/// Grid Hamiltonian matrix −Δ_h + diag(V) + κ.
pub fn grid_hamiltonian(half_width: f64, potential: &[f64], kappa: f64) -> Result<DMatrix<f64>> {
    let n = potential.len();
    let h = grid_spacing(half_width, n)?;
    let inv_h2 = 1.0 / (h * h);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 2.0 * inv_h2 + potential[i] + kappa;
        if i + 1 < n {
            m[(i, i + 1)] = -inv_h2;
            m[(i + 1, i)] = -inv_h2;
        }
    }
    Ok(m)
}

pub fn build_grid_basis_values(half_width: f64, potential: &[f64], kappa: f64, k: usize) -> Result<ModeBasis> {
    let n = potential.len();
    let h = grid_spacing(half_width, n)?;
    if k == 0 || k > n {
        return Err(Error::InvalidParam(format!("requested {k} modes from {n} grid points")));
    }
    if potential.iter().any(|v| !v.is_finite()) || !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::InvalidParam("potential and kappa must be finite, kappa ≥ 0".into()));
    }
    let (vals, vecs) = sym_eig(&grid_hamiltonian(half_width, potential, kappa)?)?;
    if vals[0] <= 0.0 {
        return Err(Error::InvalidParam(format!("grid operator not positive: lowest eigenvalue {}", vals[0])));
    }
    let scale = 1.0 / h.sqrt();
    let u = DMatrix::from_fn(n, k, |i, j| vecs[(i, j)] * scale);
    let points = grid_points(half_width, n)?;
    let kind = BasisKind::Grid { half_width, spacing: h, points, potential: potential.to_vec(), kappa };
    let labels = (0..k as i64).map(|j| vec![j]).collect();
    Ok(ModeBasis::new(kind, labels, vals[..k].to_vec(), None, Some(u)))
}

/// Σ_j λ_j^{−p}.
pub fn schatten_trace(basis: &ModeBasis, p: f64) -> f64 {
    basis.eigenvalues.iter().map(|l| l.powf(-p)).sum()
}

/// Value of the grid eigenfunction `j` at `x` by linear interpolation, with
/// the Dirichlet zeros at ±R.
fn grid_mode_value(basis: &ModeBasis, j: usize, x: f64) -> Result<f64> {
    let BasisKind::Grid { half_width, spacing, .. } = &basis.kind else {
        return Err(Error::UnsupportedBasis);
    };
    if !(x.abs() <= *half_width) {
        return Err(Error::OutOfDomain(x));
    }
    let u = basis.eigenvectors.as_ref().expect("grid basis carries eigenvectors");
    let n = u.nrows();
    let s = (x + half_width) / spacing; // node i sits at s = i + 1
    let i0 = s.floor() as usize;
    let t = s - i0 as f64;
    let val = |node: usize| if node == 0 || node > n { 0.0 } else { u[(node - 1, j)] };
    Ok((1.0 - t) * val(i0) + t * val((i0 + 1).min(n + 1)))
}

/// Value of mode `j` at `x` (torus: e^{2πi m·x}).
pub fn mode_value(basis: &ModeBasis, j: usize, x: &[f64]) -> Result<C64> {
    match &basis.kind {
        BasisKind::Torus { d, .. } => {
            if x.len() != *d {
                return Err(Error::DimensionMismatch { expected: *d, got: x.len() });
            }
            let phase: f64 = basis.labels[j].iter().zip(x).map(|(&m, &xi)| 2.0 * PI * m as f64 * xi).sum();
            Ok(C64::from_polar(1.0, phase))
        }
        BasisKind::Grid { .. } => {
            if x.len() != 1 {
                return Err(Error::DimensionMismatch { expected: 1, got: x.len() });
            }
            Ok(c(grid_mode_value(basis, j, x[0])?, 0.0))
        }
    }
}

/// Truncated Green function Σ_j u_j(x) conj(u_j(y)) / λ_j.
pub fn green_kernel(basis: &ModeBasis, x: &[f64], y: &[f64]) -> Result<C64> {
    let mut g = C64::new(0.0, 0.0);
    for j in 0..basis.dim() {
        g += mode_value(basis, j, x)? * mode_value(basis, j, y)?.conj() / basis.eigenvalues[j];
    }
    Ok(g)
}

/// Matrix of multiplication by e^{ik·x}, k = 2πm, in the torus basis:
/// (e_k)_{pq} = 1 iff label_p = label_q + m.
pub fn shift_matrix(basis: &ModeBasis, m: &[i64]) -> Result<CMat> {
    if !basis.is_torus() {
        return Err(Error::UnsupportedBasis);
    }
    let k = basis.dim();
    let mut e = CMat::zeros(k, k);
    for q in 0..k {
        let target: Vec<i64> = basis.labels[q].iter().zip(m).map(|(a, b)| a + b).collect();
        if let Some(p) = basis.index_of(&target) {
            e[(p, q)] = c(1.0, 0.0);
        }
    }
    Ok(e)
}

/// P cos(k·x) P = (e_k + e_{−k})/2.
pub fn cos_matrix(basis: &ModeBasis, m: &[i64]) -> Result<CMat> {
    let neg: Vec<i64> = m.iter().map(|x| -x).collect();
    Ok((shift_matrix(basis, m)? + shift_matrix(basis, &neg)?).scale(0.5))
}

/// P sin(k·x) P = (e_k − e_{−k})/(2i).
pub fn sin_matrix(basis: &ModeBasis, m: &[i64]) -> Result<CMat> {
    let neg: Vec<i64> = m.iter().map(|x| -x).collect();
    Ok((shift_matrix(basis, m)? - shift_matrix(basis, &neg)?) * c(0.0, -0.5))
}

/// Nonnegative, even Fourier coefficients ŵ(k) of a pair interaction on the torus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionSpec {
    pub coefficients: BTreeMap<Vec<i64>, f64>,
    /// w(0) = Σ_k ŵ(k)
    pub w0: f64,
}

impl InteractionSpec {
    pub fn new(entries: impl IntoIterator<Item = (Vec<i64>, f64)>) -> Result<Self> {
        let mut coefficients = BTreeMap::new();
        for (k, w) in entries {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParam(format!("interaction coefficient ŵ({k:?}) = {w} must be finite and ≥ 0")));
            }
            if coefficients.insert(k.clone(), w).is_some() {
                return Err(Error::InvalidParam(format!("duplicate interaction label {k:?}")));
            }
        }
        let dims: Vec<usize> = coefficients.keys().map(|k| k.len()).collect();
        if dims.windows(2).any(|p| p[0] != p[1]) {
            return Err(Error::InvalidParam("interaction labels have mixed dimensions".into()));
        }
        for (k, w) in &coefficients {
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            match coefficients.get(&neg) {
                Some(v) if (v - w).abs() <= 1e-14 * w.abs().max(1.0) => {}
                _ => return Err(Error::InvalidParam(format!("ŵ must be even: ŵ({k:?}) has no matching ŵ({neg:?})"))),
            }
        }
        let w0 = coefficients.values().sum();
        Ok(InteractionSpec { coefficients, w0 })
    }

    pub fn zero() -> Self {
        InteractionSpec { coefficients: BTreeMap::new(), w0: 0.0 }
    }

    /// ŵ = {0 ↦ w} in dimension d.
    pub fn contact(d: usize, w: f64) -> Result<Self> {
        Self::new([(vec![0; d], w)])
    }

    pub fn hat(&self, k: &[i64]) -> f64 {
        self.coefficients.get(k).copied().unwrap_or(0.0)
    }

    pub fn hat0(&self) -> f64 {
        self.coefficients.iter().find(|(k, _)| k.iter().all(|&x| x == 0)).map_or(0.0, |(_, w)| *w)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.values().all(|&w| w == 0.0)
    }

    /// Labels with ŵ(k) > 0.
    pub fn support(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> {
        self.coefficients.iter().filter(|(_, &w)| w > 0.0).map(|(k, &w)| (k, w))
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.coefficients.keys().next() {
            Some(k) if k.len() != d => Err(Error::DimensionMismatch { expected: d, got: k.len() }),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_examples() {
        let b = build_torus_basis(1, 1.0, 50.0).unwrap();
        assert_eq!(b.labels, vec![vec![0], vec![1], vec![-1]]);
        assert_eq!(b.eigenvalues[1], 1.0 + (2.0 * PI).powi(2));
        let b = build_torus_basis(2, 1.0, 1.5).unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(build_torus_basis(1, 1.0, 0.5).unwrap_err(), Error::EmptyBasis);
        assert!(matches!(build_torus_basis(4, 1.0, 5.0), Err(Error::InvalidParam(_))));
        assert!(matches!(build_torus_basis(1, 0.0, 5.0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn shift_and_trig_matrices() {
        let b = build_torus_basis(1, 1.0, 50.0).unwrap();
        let e = shift_matrix(&b, &[1]).unwrap();
        // label 0 -> label 1, label -1 -> label 0
        assert_eq!(e[(1, 0)], c(1.0, 0.0));
        assert_eq!(e[(0, 2)], c(1.0, 0.0));
        assert_eq!(e.iter().filter(|z| z.norm() > 0.0).count(), 2);
        let cm = cos_matrix(&b, &[1]).unwrap();
        let sm = sin_matrix(&b, &[1]).unwrap();
        assert!(crate::linalg::is_hermitian(&cm, 0.0));
        assert!(crate::linalg::is_hermitian(&sm, 1e-16));
    }

    #[test]
    fn interaction_validation() {
        assert!(InteractionSpec::new([(vec![1], 1.0)]).is_err());
        assert!(InteractionSpec::new([(vec![0], -1.0)]).is_err());
        let w = InteractionSpec::new([(vec![0], 1.0), (vec![1], 0.5), (vec![-1], 0.5)]).unwrap();
        assert_eq!(w.w0, 2.0);
        assert_eq!(w.hat0(), 1.0);
    }
}
