//! Fixed-K semiclassical convergence runs: exact Fock Gibbs states at a
//! decreasing sequence of λ against Monte Carlo targets of the nonlinear
//! Gibbs measure on the same modes with the same counter-term.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{gibbs_auto, hamiltonian, quasifree_log_partition, quasifree_mean_number, NmaxPolicy};
use crate::linalg::CMat;
use crate::measure::{classical_dm, estimate_z, hs_distance, relative_number, MCEstimate, MatrixEstimate};
use crate::spectral::{InteractionSpec, ModeBasis};

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub basis: ModeBasis,
    pub interaction: InteractionSpec,
    /// strictly decreasing
    pub lambdas: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub policy: NmaxPolicy,
}

/// λ-independent classical side.
#[derive(Debug, Clone)]
pub struct ClassicalTargets {
    pub z: MCEstimate,
    pub log_z: f64,
    pub log_z_stderr: f64,
    pub dm1: MatrixEstimate,
    pub dm2: MatrixEstimate,
    pub relative_number: MCEstimate,
}

pub fn classical_targets(basis: &ModeBasis, interaction: &InteractionSpec, n: usize, seed: u64) -> Result<ClassicalTargets> {
    let z = estimate_z(basis, interaction, n, seed)?;
    if !(z.mean > 0.0) {
        return Err(Error::NotConverged { iterations: n, residual: z.mean });
    }
    Ok(ClassicalTargets {
        log_z: z.mean.ln(),
        log_z_stderr: z.stderr / z.mean,
        z,
        dm1: classical_dm(basis, interaction, 1, n, seed)?,
        dm2: classical_dm(basis, interaction, 2, n, seed)?,
        relative_number: relative_number(basis, interaction, n, seed)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub lambda: f64,
    pub n_max: usize,
    pub fock_dim: usize,
    /// log(𝒵/𝒵₀) with the untruncated free partition function
    pub log_ratio: f64,
    pub log_z: f64,
    pub log_z_stderr: f64,
    pub log_gap: f64,
    /// ‖λ Γ^{(1)} − γ^{(1)}‖_HS
    pub hs_dm1: f64,
    pub dm1_stderr: f64,
    /// ‖2λ² Γ^{(2)} − γ^{(2)}‖_HS
    pub hs_dm2: f64,
    pub dm2_stderr: f64,
    /// λ(⟨𝒩⟩_λ − ⟨𝒩⟩₀)
    pub relative_number: f64,
    pub relative_number_target: f64,
    pub relative_number_stderr: f64,
    pub relative_number_gap: f64,
    pub boundary_weight: f64,
    pub truncation_warning: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub log_gap_decreasing: bool,
    /// wall-clock seconds per row, kept apart from the deterministic fields
    #[serde(skip)]
    pub seconds: Vec<f64>,
    #[serde(skip)]
    pub classical_seconds: f64,
}

pub fn check_lambda_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParam("λ grid is empty".into()));
    }
    if lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParam("λ grid entries must be positive and finite".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParam("λ grid must be strictly decreasing".into()));
    }
    Ok(())
}

/// One quantum row against precomputed classical targets.
pub fn convergence_row(basis: &ModeBasis, interaction: &InteractionSpec, lambda: f64, policy: &NmaxPolicy, t: &ClassicalTargets) -> Result<ConvergenceRow> {
    let ens = gibbs_auto(basis, lambda, policy, |m| hamiltonian(m, interaction, lambda))?;
    let log_ratio = ens.log_partition() - quasifree_log_partition(basis, lambda)?;
    let g1: CMat = ens.reduced_dm(1)? * nalgebra::Complex::new(lambda, 0.0);
    let g2: CMat = ens.reduced_dm(2)? * nalgebra::Complex::new(2.0 * lambda * lambda, 0.0);
    let rel = lambda * (ens.mean_number() - quasifree_mean_number(basis, lambda)?);
    Ok(ConvergenceRow {
        lambda,
        n_max: ens.model.n_max,
        fock_dim: ens.dim(),
        log_ratio,
        log_z: t.log_z,
        log_z_stderr: t.log_z_stderr,
        log_gap: (log_ratio - t.log_z).abs(),
        hs_dm1: hs_distance(&g1, &t.dm1.mean),
        dm1_stderr: t.dm1.aggregate_stderr(),
        hs_dm2: hs_distance(&g2, &t.dm2.mean),
        dm2_stderr: t.dm2.aggregate_stderr(),
        relative_number: rel,
        relative_number_target: t.relative_number.mean,
        relative_number_stderr: t.relative_number.stderr,
        relative_number_gap: (rel - t.relative_number.mean).abs(),
        boundary_weight: ens.boundary_weight,
        truncation_warning: ens.truncation_warning,
    })
}

pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    check_lambda_grid(&cfg.lambdas)?;
    cfg.interaction.check_dim(cfg.basis.spatial_dim())?;
    let start = Instant::now();
    let targets = classical_targets(&cfg.basis, &cfg.interaction, cfg.n_samples, cfg.seed)?;
    let classical_seconds = start.elapsed().as_secs_f64();
    let timed: Vec<(ConvergenceRow, f64)> = cfg
        .lambdas
        .par_iter()
        .map(|&l| {
            let t0 = Instant::now();
            let row = convergence_row(&cfg.basis, &cfg.interaction, l, &cfg.policy, &targets)?;
            Ok((row, t0.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let (rows, seconds): (Vec<_>, Vec<_>) = timed.into_iter().unzip();
    let log_gap_decreasing = rows.windows(2).all(|w| w[1].log_gap < w[0].log_gap);
    Ok(ConvergenceReport { rows, log_gap_decreasing, seconds, classical_seconds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_fock, free_truncated_log_partition, gibbs, kinetic_op, renorm_interaction_op};
    use crate::ineq::dense_gibbs;
    use crate::linalg::{c, herm_eig};
    use crate::measure::mean_dk_exact;
    use crate::spectral::build_torus_basis;

    #[test]
    fn lambda_grid_validation() {
        assert!(check_lambda_grid(&[0.1, 0.05, 0.02]).is_ok());
        assert!(check_lambda_grid(&[0.02, 0.05]).is_err());
        assert!(check_lambda_grid(&[0.1, 0.1]).is_err());
        assert!(check_lambda_grid(&[]).is_err());
    }

    #[test]
    fn free_model_has_no_gaps() {
        let basis = build_torus_basis(1, 10.0, 10.0 + 4.0 * std::f64::consts::PI.powi(2) + 1.0).unwrap();
        let cfg = ConvergenceConfig {
            basis,
            interaction: InteractionSpec::zero(),
            lambdas: vec![0.5, 0.25],
            n_samples: 2000,
            seed: 3,
            policy: NmaxPolicy::default(),
        };
        let r = run_convergence(&cfg).unwrap();
        for row in &r.rows {
            assert!(row.log_gap <= 1e-9 && row.relative_number.abs() <= 1e-8, "{row:?}");
            assert_eq!(row.log_z, 0.0);
        }
    }

    // ℋ(Γ, Γ₀) + λ²⟨𝕎⟩_Γ = −log(𝒵/𝒵₀) on the truncated space, and any
    // other state gives a larger value.
    #[test]
    fn gibbs_variational_principle() {
        let basis = build_torus_basis(1, 1.0, 1.0 + 4.0 * std::f64::consts::PI.powi(2) + 0.5).unwrap();
        let w = InteractionSpec::new([(vec![0], 2.0), (vec![1], 1.0), (vec![-1], 1.0)]).unwrap();
        let lambda = 0.3;
        let model = enumerate_fock(&basis, 5).unwrap();
        let wop = renorm_interaction_op(&model, &w, lambda).unwrap();
        let h = hamiltonian(&model, &w, lambda).unwrap();
        let ens = gibbs(&model, &h, lambda).unwrap();
        let log_z0 = free_truncated_log_partition(&model, lambda);
        let rho = ens.density_matrix();
        let rho0 = dense_gibbs(&(kinetic_op(&model).to_dense() * c(lambda, 0.0))).unwrap().0;
        let wd = wop.to_dense();
        // log Γ₀ is diagonal in the occupation basis
        let log_rho0: Vec<f64> = (0..model.dim()).map(|s| -lambda * model.free_energy_of(s) - log_z0).collect();
        let free = |g: &CMat| {
            let (p, _) = herm_eig(g).unwrap();
            let neg_s: f64 = p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum();
            let cross: f64 = (0..model.dim()).map(|s| g[(s, s)].re * log_rho0[s]).sum();
            neg_s - cross + lambda * lambda * (g * &wd).trace().re
        };
        let target = -(ens.log_partition() - log_z0);
        assert!((free(&rho) - target).abs() <= 1e-9, "{} vs {target}", free(&rho));
        for t in [0.1, 0.5, 0.9] {
            let mix = &rho * c(1.0 - t, 0.0) + &rho0 * c(t, 0.0);
            assert!(free(&mix) >= target - 1e-12);
        }
        let hotter = dense_gibbs(&(h.to_dense() * c(0.8 * lambda, 0.0))).unwrap().0;
        assert!(free(&hotter) > target);
    }

    // λ²⟨𝕎^ren⟩₀ stays bounded and tends to ⟨D_K⟩_{μ₀} as λ → 0.
    #[test]
    fn free_interaction_energy_is_bounded() {
        let basis = build_torus_basis(1, 4.0, 4.0 + 4.0 * std::f64::consts::PI.powi(2) + 1.0).unwrap();
        let w = InteractionSpec::new([(vec![0], 1.0), (vec![1], 0.5), (vec![-1], 0.5)]).unwrap();
        let classical = mean_dk_exact(&basis, &w).unwrap();
        let mut gaps = Vec::new();
        for lambda in [0.4, 0.2, 0.1] {
            let ens = gibbs_auto(&basis, lambda, &NmaxPolicy::default(), |m| Ok(kinetic_op(m))).unwrap();
            let wop = renorm_interaction_op(&ens.model, &w, lambda).unwrap();
            let e = lambda * lambda * ens.expect(&wop).re;
            assert!(e >= 0.0 && e <= 2.0 * classical + 1.0, "λ = {lambda}: {e}");
            gaps.push((e - classical).abs());
        }
        // O(λ) corrections of both signs: only the overall decrease is robust
        assert!(gaps[2] < 0.5 * gaps[0], "{gaps:?}");
    }
}
