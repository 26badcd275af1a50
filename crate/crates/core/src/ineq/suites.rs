//! Seeded randomized certification suites. Instance i draws from the
//! stream (seed, i), so a suite is reproducible from (seed, n_instances).

use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::checks::*;
use super::InequalityReport;
use crate::error::{Error, Result};
use crate::fock::{enumerate_fock, gibbs, gibbs_auto, hamiltonian, FockOperator, NmaxPolicy, SparseC};
use crate::linalg::{c, op_norm_herm, CMat};
use crate::rng::{stream, StreamRng};
use crate::spectral::{InteractionSpec, ModeBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Pinsker,
    SVariance,
    Derivative,
    Klein,
    VarianceControl,
    EntropyToDm,
    BerezinLieb,
}

impl Suite {
    pub const ALL: [Suite; 7] =
        [Suite::Pinsker, Suite::SVariance, Suite::Derivative, Suite::Klein, Suite::VarianceControl, Suite::EntropyToDm, Suite::BerezinLieb];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Pinsker => "pinsker",
            Suite::SVariance => "s_variance",
            Suite::Derivative => "derivative",
            Suite::Klein => "klein",
            Suite::VarianceControl => "variance_control",
            Suite::EntropyToDm => "entropy_to_dm",
            Suite::BerezinLieb => "berezin_lieb",
        }
    }

    pub fn default_dim_max(self) -> usize {
        match self {
            Suite::Pinsker | Suite::Klein => 8,
            Suite::SVariance => 12,
            Suite::Derivative => 8,
            Suite::VarianceControl => 10,
            Suite::EntropyToDm | Suite::BerezinLieb => 0,
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown suite {s:?}; expected one of {}", Suite::ALL.map(|x| x.name()).join(", "))))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub suite: Suite,
    pub instances: usize,
    pub seed: u64,
    pub reports: Vec<InequalityReport>,
    pub violations: usize,
    /// most negative margin + tolerance among violations, 0 if none
    pub worst_excess: f64,
}

fn gaussian(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Hermitian matrix with i.i.d. complex Gaussian entries (GUE-like).
pub(crate) fn random_hermitian(n: usize, rng: &mut StreamRng) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| c(gaussian(rng), gaussian(rng)));
    (&g + g.adjoint()).scale(0.5)
}

fn unit_hermitian(n: usize, rng: &mut StreamRng) -> Result<CMat> {
    let b = random_hermitian(n, rng);
    let nb = op_norm_herm(&b)?;
    Ok(b.scale(rng.random::<f64>() / nb.max(1e-300)))
}

fn random_state(n: usize, rank: usize, rng: &mut StreamRng) -> CMat {
    let g = CMat::from_fn(n, rank, |_, _| c(gaussian(rng), gaussian(rng)));
    let m = &g * g.adjoint();
    let t = crate::linalg::trace(&m).re;
    m.scale(1.0 / t)
}

fn dim_in(rng: &mut StreamRng, dim_max: usize) -> usize {
    rng.random_range(2..=dim_max.max(2))
}

fn instance(suite: Suite, seed: u64, i: usize, dim_max: usize) -> Result<Vec<InequalityReport>> {
    let mut rng = stream(seed, i as u64);
    let rng = &mut rng;
    let tag = |mut v: Vec<InequalityReport>| {
        for r in &mut v {
            r.instance = format!("seed={seed},i={i},{}", r.instance);
        }
        v
    };
    let out = match suite {
        Suite::Pinsker => {
            let n = dim_in(rng, dim_max);
            let rank = rng.random_range(1..=n);
            let g = random_state(n, rank, rng);
            let gp = random_state(n, n, rng);
            vec![check_pinsker(&g, &gp)?]
        }
        Suite::SVariance => {
            let n = dim_in(rng, dim_max);
            let scale = 0.5 + 2.5 * rng.random::<f64>();
            let h = random_hermitian(n, rng).scale(scale);
            let a = unit_hermitian(n, rng)?;
            let b = unit_hermitian(n, rng)?;
            let grid: Vec<f64> = (0..=8).map(|j| j as f64 / 8.0).collect();
            check_s_variance_suite(&h, &a, &b, &grid)?
        }
        Suite::Derivative => {
            let n = dim_in(rng, dim_max);
            let scale = 0.5 + 2.5 * rng.random::<f64>();
            let h = random_hermitian(n, rng).scale(scale);
            let a = unit_hermitian(n, rng)?;
            check_derivative_lemma(&h, &a, &[-0.1, 0.0, 0.1])?
        }
        Suite::Klein => {
            let n = dim_in(rng, dim_max);
            let u = crate::linalg::herm_eig(&random_hermitian(n, rng))?.1;
            let spectrum: Vec<f64> = (0..n).map(|_| 0.2 + 3.0 * rng.random::<f64>()).collect();
            let h = crate::linalg::spectral_apply(&spectrum, &u, |x| x);
            let root = crate::linalg::spectral_apply(&spectrum, &u, f64::sqrt);
            let b = unit_hermitian(n, rng)?;
            let nb = op_norm_herm(&b)?.max(1e-300);
            let cc = 0.4;
            let a = (&root * b * &root).scale(cc / nb);
            check_klein_perturbation(&h, &crate::linalg::hermitian_part(&a), cc)?
        }
        Suite::VarianceControl => {
            let n = dim_in(rng, dim_max);
            let scale = 0.5 + 2.5 * rng.random::<f64>();
            let h = random_hermitian(n, rng).scale(scale);
            let a = unit_hermitian(n, rng)?;
            check_variance_control(&h, &a, 0.2)?
        }
        Suite::EntropyToDm => {
            let lambda = 0.3 + 0.7 * rng.random::<f64>();
            let eig = [1.0 + 2.0 * rng.random::<f64>(), 1.0 + 2.0 * rng.random::<f64>()];
            let basis = ModeBasis::from_spectrum(&eig)?;
            let sub = rng.random::<u64>();
            if i % 2 == 0 {
                let w1 = 2.0 * rng.random::<f64>();
                let w = InteractionSpec::new([(vec![0], 2.0 * rng.random::<f64>()), (vec![1], w1), (vec![-1], w1)])?;
                let ens = gibbs_auto(&basis, lambda, &NmaxPolicy::default(), |m| hamiltonian(m, &w, lambda))?;
                check_entropy_to_dm(FockState::Ensemble(&ens), lambda, 20, sub)?
            } else {
                let model = enumerate_fock(&basis, 4)?;
                let n = model.dim();
                let rank = rng.random_range(1..=n);
                let rho = random_state(n, rank, rng);
                check_entropy_to_dm_dense(&model, &rho, lambda, 20, sub)?
            }
        }
        Suite::BerezinLieb => {
            let eps = 0.2 + 0.8 * rng.random::<f64>();
            let l1 = 0.5 + rng.random::<f64>();
            let model = enumerate_fock(&ModeBasis::single_mode(l1)?, 120)?;
            let thermal = |beta: f64| {
                let d: Vec<f64> = (0..model.dim()).map(|s| model.free_energy_of(s)).collect();
                gibbs(&model, &FockOperator::new(SparseC::diagonal(&d)), beta)
            };
            let b2 = 0.4 + 1.5 * rng.random::<f64>();
            let other = thermal(b2)?;
            let first = match i % 3 {
                0 => thermal(0.4 + 1.5 * rng.random::<f64>())?,
                1 => thermal(60.0)?,
                _ => {
                    let g = 0.2 * rng.random::<f64>();
                    let c0 = 3.0 * rng.random::<f64>();
                    let d: Vec<f64> = (0..model.dim()).map(|s| model.free_energy_of(s) + g * (s as f64 - c0).powi(2)).collect();
                    gibbs(&model, &FockOperator::new(SparseC::diagonal(&d)), 1.0)?
                }
            };
            vec![check_berezin_lieb(&first, &other, eps, 20_000, rng.random::<u64>(), 3.0)?]
        }
    };
    Ok(tag(out))
}

/// Runs `n_instances` seeded instances; `dim_max = 0` selects the suite default.
pub fn run_suite(suite: Suite, n_instances: usize, seed: u64, dim_max: usize) -> Result<SuiteResult> {
    let dim_max = if dim_max == 0 { suite.default_dim_max() } else { dim_max };
    let per: Vec<Vec<InequalityReport>> = (0..n_instances).into_par_iter().map(|i| instance(suite, seed, i, dim_max)).collect::<Result<_>>()?;
    let reports: Vec<InequalityReport> = per.into_iter().flatten().collect();
    let fails: Vec<&InequalityReport> = reports.iter().filter(|r| !r.pass).collect();
    let worst_excess = fails.iter().map(|r| -(r.margin + r.tolerance)).fold(0.0, f64::max);
    Ok(SuiteResult { suite, instances: n_instances, seed, violations: fails.len(), worst_excess, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_reproducible_and_clean() {
        for s in Suite::ALL {
            let n = if s == Suite::BerezinLieb { 3 } else { 12 };
            let a = run_suite(s, n, 11, 0).unwrap();
            let b = run_suite(s, n, 11, 0).unwrap();
            assert_eq!(a.reports, b.reports);
            assert_eq!(a.violations, 0, "{}: {:?}", s.name(), a.reports.iter().filter(|r| !r.pass).collect::<Vec<_>>());
        }
        assert!("nope".parse::<Suite>().is_err());
        assert_eq!("klein".parse::<Suite>().unwrap(), Suite::Klein);
    }
}
