//! Self-consistent counter-term potentials.
//!
//! Homogeneous case: the scalar equation ν₀(V₀) = ν₀ on the torus. Grid case
//! (1D Dirichlet box): the λ-dependent fixed point
//!   V_λ − λ w∗ρ₀^{V_λ} + λ w(0)/2 = V − ν(λ),
//!   ν(λ) = λŵ(0)ρ₀^κ(λ) − κ − λw(0)/2 with the continuum ρ₀^κ(λ),
//! and its λ → 0 limit V₀ = V + w∗ρ₀ + κ, ρ₀ = [(−Δ+V₀)⁻¹ − (−Δ+κ)⁻¹](x;x).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::sym_eig;
use crate::quad::integrate_to_inf;
use crate::spectral::{grid_hamiltonian, grid_points, grid_spacing};
use crate::thermo::{bisect_increasing, nu0_of_kappa, rho0_kappa};

#[derive(Debug, Clone, Serialize)]
pub struct CountertermSolution {
    /// scalar V₀ (length 1) or nodal values
    pub v: Vec<f64>,
    /// sup-norm of the defining equation's defect at `v`
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// 0 for the limiting equation
    pub lambda: f64,
}

impl CountertermSolution {
    /// Turns a non-converged solution into `NotConverged`.
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { iterations: self.iterations, residual: self.residual })
        }
    }
}

/// Solves ŵ0·g(V₀) + V₀ − ŵ0·φ_d(V₀) = ν₀ with g = log/4π (d = 2) or √·/4π (d = 3).
pub fn solve_v0_homogeneous(d: usize, nu0: f64, w_hat0: f64) -> Result<CountertermSolution> {
    if !(2..=3).contains(&d) {
        return Err(Error::Unsupported(format!("homogeneous counter-term needs d = 2, 3; got {d}")));
    }
    if !nu0.is_finite() || !(w_hat0 >= 0.0) {
        return Err(Error::InvalidParam("need finite ν₀ and ŵ0 ≥ 0".into()));
    }
    let tol = 1e-10 * (1.0 + nu0.abs());
    if w_hat0 == 0.0 {
        if nu0 <= 0.0 {
            return Err(Error::BracketFailure { lo: 0.0, hi: f64::INFINITY });
        }
        return Ok(CountertermSolution { v: vec![nu0], residual: 0.0, iterations: 0, converged: true, lambda: 0.0 });
    }
    let (v0, _) = bisect_increasing(|k| nu0_of_kappa(d, k, w_hat0), nu0, 1e-8, 1e8, 1e-3 * tol)?;
    let residual = (nu0_of_kappa(d, v0, w_hat0)? - nu0).abs();
    Ok(CountertermSolution { v: vec![v0], residual, iterations: 0, converged: residual <= tol, lambda: 0.0 })
}

/// Dirichlet box [−R, R] with `n_points` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        grid_points(self.half_width, self.n_points)
    }

    pub fn spacing(&self) -> Result<f64> {
        grid_spacing(self.half_width, self.n_points)
    }
}

/// Sampled problem data shared by the grid solvers.
#[derive(Debug, Clone)]
pub struct GridProblem {
    pub grid: GridSpec,
    pub x: Vec<f64>,
    /// V at the nodes
    pub v: Vec<f64>,
    /// trapezoid convolution matrix h·w(x_i − x_j)
    pub conv: DMatrix<f64>,
    pub w_at_zero: f64,
    /// ∫_ℝ w
    pub w_hat0: f64,
    pub kappa: f64,
}

impl GridProblem {
    pub fn new(grid: GridSpec, potential: impl Fn(f64) -> f64, w: impl Fn(f64) -> f64, kappa: f64) -> Result<Self> {
        let x = grid.points()?;
        let h = grid.spacing()?;
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParam(format!("κ = {kappa} must be positive")));
        }
        let v: Vec<f64> = x.iter().map(|&xi| potential(xi)).collect();
        if v.iter().any(|y| !y.is_finite() || *y < 0.0) {
            return Err(Error::InvalidParam("potential must be finite and ≥ 0 on the grid".into()));
        }
        let n = x.len();
        let conv = DMatrix::from_fn(n, n, |i, j| h * w((x[i] - x[j]).abs()));
        if conv.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidParam("interaction profile must be finite".into()));
        }
        let w_hat0 = 2.0 * integrate_to_inf(&w, 0.0, 1e-300, 1e-13).value;
        Ok(GridProblem { grid, x, v, conv, w_at_zero: w(0.0), w_hat0, kappa })
    }

    fn conv_apply(&self, f: &[f64]) -> Vec<f64> {
        (&self.conv * DVector::from_column_slice(f)).as_slice().to_vec()
    }

    /// Eigenpairs of −Δ_h + diag(U); eigenvectors normalized in h·Σ.
    fn spectrum(&self, u: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let (e, vecs) = sym_eig(&grid_hamiltonian(self.grid.half_width, u, 0.0)?)?;
        if e[0] <= 0.0 {
            return Err(Error::EigFailure(format!("grid operator not positive (lowest eigenvalue {})", e[0])));
        }
        Ok((e, vecs))
    }

    /// ρ(x_i) = Σ_j |u_j(x_i)|² f(E_j).
    fn diagonal(&self, u: &[f64], f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let (e, vecs) = self.spectrum(u)?;
        let h = self.grid.spacing()?;
        let fe: Vec<f64> = e.iter().map(|&x| f(x)).collect();
        Ok((0..u.len()).map(|i| (0..e.len()).map(|j| vecs[(i, j)] * vecs[(i, j)] * fe[j]).sum::<f64>() / h).collect())
    }

    /// ρ₀^U(x) = [1/(e^{λ(−Δ+U)} − 1)](x;x).
    pub fn bose_density(&self, u: &[f64], lambda: f64) -> Result<Vec<f64>> {
        self.diagonal(u, |e| 1.0 / (lambda * e).exp_m1())
    }

    /// (−Δ+U)⁻¹(x;x).
    pub fn resolvent_diagonal(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.diagonal(u, |e| 1.0 / e)
    }

    pub fn nu(&self, lambda: f64) -> Result<f64> {
        Ok(lambda * self.w_hat0 * rho0_kappa(1, lambda, self.kappa)?.value - self.kappa - lambda * self.w_at_zero / 2.0)
    }

    /// Right side of the λ fixed point: V − ν(λ) + λ w∗ρ₀^U − λw(0)/2.
    fn lambda_map(&self, u: &[f64], lambda: f64, nu: f64) -> Result<Vec<f64>> {
        let rho = self.bose_density(u, lambda)?;
        let c = self.conv_apply(&rho);
        Ok((0..u.len()).map(|i| self.v[i] - nu + lambda * c[i] - lambda * self.w_at_zero / 2.0).collect())
    }

    /// sup |U − λ w∗ρ₀^U + λw(0)/2 − V + ν(λ)|, recomputed from scratch.
    pub fn lambda_defect(&self, u: &[f64], lambda: f64) -> Result<f64> {
        let nu = self.nu(lambda)?;
        let rho = self.bose_density(u, lambda)?;
        let c = self.conv_apply(&rho);
        Ok((0..u.len()).map(|i| (u[i] - lambda * c[i] + lambda * self.w_at_zero / 2.0 - self.v[i] + nu).abs()).fold(0.0, f64::max))
    }

    fn limiting_map(&self, u: &[f64], g_kappa: &[f64]) -> Result<Vec<f64>> {
        let g = self.resolvent_diagonal(u)?;
        let rho: Vec<f64> = g.iter().zip(g_kappa).map(|(a, b)| a - b).collect();
        let c = self.conv_apply(&rho);
        Ok((0..u.len()).map(|i| self.v[i] + c[i] + self.kappa).collect())
    }

    /// sup |U − V − w∗ρ₀ − κ|, recomputed from scratch.
    pub fn limiting_defect(&self, u: &[f64]) -> Result<f64> {
        let gk = self.resolvent_diagonal(&vec![self.kappa; u.len()])?;
        let m = self.limiting_map(u, &gk)?;
        Ok(u.iter().zip(&m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    fn check_iteration(theta: f64, tol: f64) -> Result<()> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidParam(format!("damping θ = {theta} not in (0, 1]")));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParam("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Damped iteration U ← (1−θ)U + θ·T(U) for the λ problem, from U = V − ν(λ).
    pub fn solve_lambda(&self, lambda: f64, theta: f64, tol: f64, max_iter: usize) -> Result<CountertermSolution> {
        Self::check_iteration(theta, tol)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParam(format!("λ = {lambda} must be positive")));
        }
        let nu = self.nu(lambda)?;
        let map = |u: &[f64]| self.lambda_map(u, lambda, nu);
        let (v, iterations, converged) = damped(self.v.iter().map(|x| x - nu).collect(), map, theta, tol, max_iter)?;
        let residual = self.lambda_defect(&v, lambda)?;
        Ok(CountertermSolution { v, residual, iterations, converged, lambda })
    }

    /// Damped iteration for the limiting equation, from U = V + κ.
    pub fn solve_limit(&self, theta: f64, tol: f64, max_iter: usize) -> Result<CountertermSolution> {
        Self::check_iteration(theta, tol)?;
        let gk = self.resolvent_diagonal(&vec![self.kappa; self.v.len()])?;
        let map = |u: &[f64]| self.limiting_map(u, &gk);
        let (v, iterations, converged) = damped(self.v.iter().map(|x| x + self.kappa).collect(), map, theta, tol, max_iter)?;
        let residual = self.limiting_defect(&v)?;
        Ok(CountertermSolution { v, residual, iterations, converged, lambda: 0.0 })
    }

    /// ‖(−Δ+U₁)⁻¹ − (−Δ+U₂)⁻¹‖²_HS on the grid.
    pub fn resolvent_hs2(&self, u1: &[f64], u2: &[f64]) -> Result<f64> {
        let inv = |u: &[f64]| -> Result<DMatrix<f64>> {
            let (e, vecs) = self.spectrum(u)?;
            let scaled = DMatrix::from_fn(e.len(), e.len(), |i, j| vecs[(i, j)] / e[j]);
            Ok(scaled * vecs.transpose())
        };
        let d = inv(u1)? - inv(u2)?;
        Ok(d.iter().map(|x| x * x).sum())
    }
}

/// Iterates until the defect |U − T(U)|_∞ of the current iterate is ≤ tol.
/// Returns the final iterate, the number of map evaluations and whether
/// the tolerance was met.
fn damped(mut u: Vec<f64>, map: impl Fn(&[f64]) -> Result<Vec<f64>>, theta: f64, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, bool)> {
    let mut best = (f64::INFINITY, u.clone());
    for it in 1..=max_iter.max(1) {
        let t = map(&u)?;
        let defect = u.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if defect < best.0 {
            best = (defect, u.clone());
        }
        if defect <= tol {
            return Ok((u, it, true));
        }
        if !defect.is_finite() {
            break;
        }
        for (ui, ti) in u.iter_mut().zip(&t) {
            *ui = (1.0 - theta) * *ui + theta * ti;
        }
    }
    Ok((best.1, max_iter, false))
}

pub fn solve_counterterm_grid(
    grid: GridSpec,
    potential: impl Fn(f64) -> f64,
    w: impl Fn(f64) -> f64,
    lambda: f64,
    kappa: f64,
    theta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CountertermSolution> {
    GridProblem::new(grid, potential, w, kappa)?.solve_lambda(lambda, theta, tol, max_iter)
}

pub fn solve_limiting_v0_grid(
    grid: GridSpec,
    potential: impl Fn(f64) -> f64,
    w: impl Fn(f64) -> f64,
    kappa: f64,
    theta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CountertermSolution> {
    GridProblem::new(grid, potential, w, kappa)?.solve_limit(theta, tol, max_iter)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub lambda: f64,
    /// sup_x |V_λ − V₀|/(1 + V)
    pub sup_relative: f64,
    /// ‖(−Δ+V_λ)⁻¹ − (−Δ+V₀)⁻¹‖²_HS
    pub resolvent_hs2: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// ½V ≤ V_λ − κ ≤ 3V/2 at every node (observational in 1D)
    pub sandwich_holds: bool,
    pub sandwich_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountertermConvergenceReport {
    pub kappa: f64,
    pub limit: CountertermSolution,
    /// V_λ per grid entry, aligned with `rows`
    pub solutions: Vec<CountertermSolution>,
    pub rows: Vec<ConvergenceRow>,
    pub sup_decreasing: bool,
    pub hs_decreasing: bool,
}

/// Solves the λ problem on a strictly decreasing λ grid and compares with
/// the limiting potential.
pub fn counterterm_convergence_report(problem: &GridProblem, lambda_grid: &[f64], theta: f64, tol: f64, max_iter: usize) -> Result<CountertermConvergenceReport> {
    if lambda_grid.is_empty() || lambda_grid.windows(2).any(|w| w[1] >= w[0]) || lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidParam("λ grid must be positive and strictly decreasing".into()));
    }
    let limit = problem.solve_limit(theta, tol, max_iter)?;
    let solved: Vec<(CountertermSolution, ConvergenceRow)> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let s = problem.solve_lambda(lambda, theta, tol, max_iter)?;
            let sup_relative = s.v.iter().zip(&limit.v).zip(&problem.v).map(|((a, b), v)| (a - b).abs() / (1.0 + v)).fold(0.0, f64::max);
            let resolvent_hs2 = problem.resolvent_hs2(&s.v, &limit.v)?;
            let sandwich_violation = s
                .v
                .iter()
                .zip(&problem.v)
                .map(|(vl, v)| {
                    let shifted = vl - problem.kappa;
                    (0.5 * v - shifted).max(shifted - 1.5 * v).max(0.0)
                })
                .fold(0.0, f64::max);
            let row = ConvergenceRow {
                lambda,
                sup_relative,
                resolvent_hs2,
                residual: s.residual,
                iterations: s.iterations,
                converged: s.converged,
                sandwich_holds: sandwich_violation == 0.0,
                sandwich_violation,
            };
            Ok((s, row))
        })
        .collect::<Result<_>>()?;
    let (solutions, rows): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let dec = |f: fn(&ConvergenceRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    Ok(CountertermConvergenceReport {
        kappa: problem.kappa,
        sup_decreasing: dec(|r| r.sup_relative),
        hs_decreasing: dec(|r| r.resolvent_hs2),
        limit,
        solutions,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::phi;
    use std::f64::consts::PI;

    fn gaussian_w(r: f64) -> f64 {
        (-r * r / 0.5).exp() / (0.5 * PI).sqrt()
    }

    fn grid() -> GridSpec {
        GridSpec { half_width: 6.0, n_points: 239 }
    }

    #[test]
    fn homogeneous_examples() {
        let s = solve_v0_homogeneous(3, 1.7, 0.0).unwrap();
        assert_eq!(s.v[0], 1.7);
        let target = nu0_of_kappa(3, 2.0, 1.0).unwrap();
        let s = solve_v0_homogeneous(3, target, 1.0).unwrap();
        assert!((s.v[0] - 2.0).abs() < 1e-9 && s.residual <= 1e-10 * (1.0 + target.abs()));
        let nu = 1.0 - 4.0 * PI * phi(2, 1.0).unwrap();
        let s = solve_v0_homogeneous(2, nu, 4.0 * PI).unwrap();
        assert!((s.v[0] - 1.0).abs() < 1e-9, "{s:?}");
        let below = nu0_of_kappa(2, 1e-9, 1.0).unwrap() - 1.0;
        let r = solve_v0_homogeneous(2, below, 1.0);
        assert!(matches!(r, Err(Error::BracketFailure { .. })), "{r:?}");
    }

    #[test]
    fn homogeneous_lhs_is_increasing() {
        for d in [2, 3] {
            let vals: Vec<f64> = (0..50).map(|i| nu0_of_kappa(d, 1e-3 * 1e6f64.powf(i as f64 / 49.0), 1.0).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]), "d = {d}");
        }
    }

    #[test]
    fn zero_interaction_is_affine() {
        let s = solve_counterterm_grid(grid(), |x| x * x, |_| 0.0, 0.1, 5.0, 0.5, 1e-12, 10).unwrap();
        assert_eq!(s.iterations, 1);
        assert!(s.residual < 1e-13);
        let x = grid().points().unwrap();
        assert!(s.v.iter().zip(&x).all(|(v, xi)| (v - xi * xi - 5.0).abs() < 1e-12));
        let l = solve_limiting_v0_grid(grid(), |x| x * x, |_| 0.0, 5.0, 0.5, 1e-12, 10).unwrap();
        assert!(l.residual < 1e-13);
    }

    #[test]
    fn frozen_regime_converges_fast() {
        let s = solve_counterterm_grid(grid(), |x| x * x, gaussian_w, 50.0, 5.0, 1.0, 1e-10, 20).unwrap();
        assert!(s.converged && s.iterations <= 3, "{s:?}");
    }

    #[test]
    fn harmonic_fixed_point_and_defect() {
        let p = GridProblem::new(grid(), |x| x * x, gaussian_w, 5.0).unwrap();
        let s = p.solve_lambda(0.05, 0.5, 1e-8, 500).unwrap();
        assert!(s.converged && s.residual <= 1e-6, "{s:?}");
        let again = p.lambda_defect(&s.v, 0.05).unwrap();
        assert!((again - s.residual).abs() <= 1e-12);
        let l = p.solve_limit(0.5, 1e-8, 500).unwrap();
        assert!(l.converged);
        assert!((p.limiting_defect(&l.v).unwrap() - l.residual).abs() <= 1e-12);
    }

    #[test]
    fn convolution_is_symmetric() {
        let p = GridProblem::new(grid(), |x| x * x, gaussian_w, 5.0).unwrap();
        let f: Vec<f64> = p.x.iter().map(|x| (-x * x).exp()).collect();
        let g: Vec<f64> = p.x.iter().map(|x| 1.0 / (1.0 + x * x)).collect();
        let wf = p.conv_apply(&f);
        let wg = p.conv_apply(&g);
        let a: f64 = f.iter().zip(&wg).map(|(x, y)| x * y).sum();
        let b: f64 = wf.iter().zip(&g).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        assert!((p.w_hat0 - 1.0).abs() < 1e-10);
    }

    proptest::proptest! {
        #[test]
        fn convolution_symmetric_on_random_vectors(
            f in proptest::collection::vec(-1.0f64..1.0, 59),
            g in proptest::collection::vec(-1.0f64..1.0, 59),
            sigma in 0.1f64..2.0,
        ) {
            let w = move |r: f64| (-r * r / (2.0 * sigma * sigma)).exp();
            let p = GridProblem::new(GridSpec { half_width: 4.0, n_points: 59 }, |_| 1.0, w, 1.0).unwrap();
            let a: f64 = f.iter().zip(&p.conv_apply(&g)).map(|(x, y)| x * y).sum();
            let b: f64 = p.conv_apply(&f).iter().zip(&g).map(|(x, y)| x * y).sum();
            proptest::prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn flat_potential_gives_flat_interior() {
        let g = GridSpec { half_width: 10.0, n_points: 199 };
        let p = GridProblem::new(g, |_| 0.0, gaussian_w, 5.0).unwrap();
        let l = p.solve_limit(0.5, 1e-10, 500).unwrap();
        // interior nodes further than 4 from the walls
        let inner: Vec<f64> = p.x.iter().zip(&l.v).filter(|(x, _)| x.abs() < 6.0).map(|(_, v)| *v).collect();
        let spread = inner.iter().copied().fold(f64::NEG_INFINITY, f64::max) - inner.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-6, "spread {spread}");
    }
}
