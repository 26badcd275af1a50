//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;

use nlgibbs::counterterm::{counterterm_convergence_report, solve_v0_homogeneous, GridProblem, GridSpec};
use nlgibbs::experiment::{classical_targets, convergence_row};
use nlgibbs::fock::{dGamma, enumerate_fock, gibbs, gibbs_auto, hamiltonian, kinetic_op, quasifree_dm_closed, quasifree_log_partition, quasifree_variance, NmaxPolicy};
use nlgibbs::ineq::{run_suite, Suite};
use nlgibbs::linalg::{c, max_abs, CMat};
use nlgibbs::measure::cauchy_diagnostic;
use nlgibbs::quad::integrate_to_inf;
use nlgibbs::rng::stream;
use nlgibbs::spectral::{build_torus_basis, InteractionSpec, ModeBasis};
use nlgibbs::thermo::{bose_integral_expansion, nu0_of_kappa, phi_d, verify_lattice_expansion, PhiRepresentation};
use nlgibbs::Result;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

/// K = 2 free modes with λλ_j ∈ {ln 2, 1}.
fn quasi_free_exactness() -> Result<Verdict> {
    let t = Instant::now();
    let lambda = 0.5;
    let basis = ModeBasis::from_spectrum(&[2.0 * 2f64.ln(), 2.0])?;
    let model = enumerate_fock(&basis, 90)?;
    let ens = gibbs(&model, &kinetic_op(&model), lambda)?;
    let mut dm_err: f64 = 0.0;
    for k in [1, 2] {
        dm_err = dm_err.max(max_abs(&(ens.reduced_dm(k)? - quasifree_dm_closed(&basis, lambda, k)?)));
    }
    // occupations 1 and 1/(e − 1); log 𝒵₀ = ln 2 − ln(1 − 1/e)
    let g = [1.0, 1.0 / (1f64.exp() - 1.0)];
    let hand = ens.reduced_dm(1)?;
    let hand_err = (hand[(0, 0)].re - g[0]).abs().max((hand[(1, 1)].re - g[1]).abs()).max(hand[(0, 1)].norm());
    let hand2 = ens.reduced_dm(2)?;
    // ½⟨a†₀a†₀a₀a₀⟩ = γ₀², ½⟨a†₀a†₁a₁a₀⟩ = γ₀γ₁/2
    let hand2_err = (hand2[(0, 0)].re - g[0] * g[0]).abs().max((hand2[(1, 1)].re - g[0] * g[1] / 2.0).abs());
    let lz_closed = 2f64.ln() - (1.0 - (-1f64).exp()).ln();
    let lz_err = (ens.log_partition() - quasifree_log_partition(&basis, lambda)?).abs().max((ens.log_partition() - lz_closed).abs());
    let secs = t.elapsed().as_secs_f64();
    let err = dm_err.max(hand_err).max(hand2_err);
    verdict(err <= 1e-9 && lz_err <= 1e-10 && secs < 5.0, format!("max dm error {err:.1e} (≤ 1e-9), log 𝒵₀ error {lz_err:.1e} (≤ 1e-10), {secs:.2} s"))
}

fn random_hermitian(rng: &mut impl Rng, k: usize) -> CMat {
    let m = CMat::from_fn(k, k, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&m + m.adjoint()) * c(0.5, 0.0)
}

fn wick_variance() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let mut rng = stream(2024, i);
        let k = 1 + (i % 3) as usize;
        let lambda = rng.random_range(0.5..2.0);
        // λλ_j ∈ [1, 3]: n_max = 45 leaves a tail below 1e-13
        let spectrum: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..3.0) / lambda).collect();
        let basis = ModeBasis::from_spectrum(&spectrum)?;
        let a = random_hermitian(&mut rng, k);
        let model = enumerate_fock(&basis, 45)?;
        let ens = gibbs(&model, &kinetic_op(&model), lambda)?;
        let op = dGamma(&model, &a)?;
        let mean = ens.expect(&op).re;
        let second = ens.expect(&op.matmul(&op)).re;
        let exact = lambda * lambda * (second - mean * mean);
        let closed = quasifree_variance(&basis, lambda, &a)?;
        worst = worst.max((exact - closed).abs());
    }
    verdict(worst <= 1e-9, format!("max |closed − exact| = {worst:.1e} over 50 instances (≤ 1e-9)"))
}

fn single_mode_limit() -> Result<Verdict> {
    let t = Instant::now();
    let basis = ModeBasis::single_mode(1.0)?;
    let w = InteractionSpec::contact(1, 1.0)?;
    let target = ((PI / 2.0).sqrt()).ln() - 0.5;
    // ∫_0^∞ e^{−t} e^{−(t−1)²/2} dt with |α|² ~ Exp(1)
    let quad = integrate_to_inf(|t| (-t - 0.5 * (t - 1.0) * (t - 1.0)).exp(), 0.0, 1e-15, 1e-13).value.ln();
    let mut gaps = Vec::new();
    for lambda in [0.1, 0.05, 0.02] {
        let ens = gibbs_auto(&basis, lambda, &NmaxPolicy::default(), |m| hamiltonian(m, &w, lambda))?;
        gaps.push((ens.log_partition() - quasifree_log_partition(&basis, lambda)? - target).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    let mono = gaps.windows(2).all(|g| g[1] < g[0]);
    let pass = mono && gaps[2] <= 0.02 && (quad - target).abs() <= 1e-10 && secs < 10.0;
    verdict(pass, format!("gaps {:.4} {:.4} {:.4} (last ≤ 0.02), quadrature oracle off by {:.1e}, {secs:.2} s", gaps[0], gaps[1], gaps[2], (quad - target).abs()))
}

struct Desk {
    row: nlgibbs::experiment::ConvergenceRow,
}

/// d = 1 torus, κ = 10, three modes, ŵ = {0 ↦ 100, ±1 ↦ 50}, λ = 0.02, 10⁶ samples.
fn desk_run() -> Result<Desk> {
    let basis = build_torus_basis(1, 10.0, 10.0 + 4.0 * PI * PI + 1.0)?;
    let w = InteractionSpec::new([(vec![0], 100.0), (vec![1], 50.0), (vec![-1], 50.0)])?;
    let targets = classical_targets(&basis, &w, 1_000_000, 42)?;
    let row = convergence_row(&basis, &w, 0.02, &NmaxPolicy::default(), &targets)?;
    Ok(Desk { row })
}

fn density_matrix_limit(d: &Desk) -> Result<Verdict> {
    let r = &d.row;
    let b1 = 3.0 * r.dm1_stderr + 3.0 * r.lambda;
    let b2 = 3.0 * r.dm2_stderr + 3.0 * r.lambda;
    let pass = r.hs_dm1 <= 0.05 && r.hs_dm1 <= b1 && r.hs_dm2 <= 0.1 && r.hs_dm2 <= b2 && !r.truncation_warning;
    verdict(pass, format!("k=1: {:.4} (≤ 0.05, ≤ {b1:.4}); k=2: {:.4} (≤ 0.1, ≤ {b2:.4}); Fock dim {}", r.hs_dm1, r.hs_dm2, r.fock_dim))
}

fn relative_number_limit(d: &Desk) -> Result<Verdict> {
    let r = &d.row;
    let budget = 4.0 * r.relative_number_stderr + 3.0 * r.lambda;
    verdict(
        r.relative_number_gap <= budget,
        format!("quantum {:.5} vs classical {:.5} ± {:.1e}: gap {:.1e} (≤ {budget:.1e})", r.relative_number, r.relative_number_target, r.relative_number_stderr, r.relative_number_gap),
    )
}

fn free_gas_expansions() -> Result<Verdict> {
    let mut dual: f64 = 0.0;
    for kappa in [0.5, 1.0, 4.0] {
        let g = phi_d(3, kappa, PhiRepresentation::GreenSum)?.value;
        let th = phi_d(3, kappa, PhiRepresentation::ThetaIntegral)?.value;
        let ls = phi_d(3, kappa, PhiRepresentation::LatticeSum)?.value;
        dual = dual.max((g - th).abs()).max((g - ls).abs());
    }
    let mut lattice = Vec::new();
    for d in 1..=3 {
        let r = verify_lattice_expansion(d, 1.0, &[1e-2, 1e-3, 1e-4])?;
        lattice.push((d, r.converged, r.residuals.last().copied().unwrap_or(f64::NAN).abs() / r.predicted_values[0].abs()));
    }
    let mut orders = Vec::new();
    for d in 1..=5 {
        let r = bose_integral_expansion(d, &[1e-2, 1e-3, 1e-4])?;
        orders.push((d, r.converged));
    }
    let pass = dual <= 1e-8 && lattice.iter().all(|l| l.1) && orders.iter().all(|o| o.1);
    let lat: Vec<String> = lattice.iter().map(|(d, ok, rel)| format!("d={d}:{}{rel:.0e}", if *ok { "" } else { "FAIL " })).collect();
    let ord: Vec<String> = orders.iter().filter(|o| !o.1).map(|o| o.0.to_string()).collect();
    verdict(pass, format!("φ₃ duals within {dual:.1e}; lattice residual/φ_d {}; order tests failing for d ∈ {{{}}}", lat.join(" "), ord.join(",")))
}

fn inequality_suites() -> Result<Verdict> {
    let t = Instant::now();
    let plan = [
        (Suite::Pinsker, 500),
        (Suite::SVariance, 500),
        (Suite::Derivative, 500),
        (Suite::Klein, 500),
        (Suite::EntropyToDm, 500),
        (Suite::VarianceControl, 200),
        (Suite::BerezinLieb, 20),
    ];
    let mut parts = Vec::new();
    let mut total = 0;
    for (s, n) in plan {
        let r = run_suite(s, n, 7, 0)?;
        total += r.violations;
        parts.push(format!("{} {}", s.name(), r.violations));
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(total == 0 && secs < 300.0, format!("violations: {}; {secs:.1} s", parts.join(", ")))
}

fn counter_term() -> Result<Verdict> {
    let mut hom_res: f64 = 0.0;
    let mut hom_err: f64 = 0.0;
    for (d, v, w) in [(2, 0.3, 1.0), (2, 5.0, 4.0 * PI), (3, 2.0, 1.0), (3, 40.0, 10.0)] {
        let nu = nu0_of_kappa(d, v, w)?;
        let s = solve_v0_homogeneous(d, nu, w)?;
        hom_res = hom_res.max(s.residual / (1.0 + nu.abs()));
        hom_err = hom_err.max((s.v[0] - v).abs());
    }
    let w = |r: f64| (-r * r / 0.5).exp() / (0.5 * PI).sqrt();
    let mut grid = Vec::new();
    let mut ok = hom_res <= 1e-10 && hom_err <= 1e-9;
    for kappa in [5.0, 10.0] {
        let p = GridProblem::new(GridSpec { half_width: 8.0, n_points: 319 }, |x| x * x, w, kappa)?;
        let r = counterterm_convergence_report(&p, &[0.2, 0.1, 0.05], 0.5, 1e-8, 500)?;
        let worst = r.rows.iter().map(|x| x.residual).fold(r.limit.residual, f64::max);
        ok &= r.limit.converged && r.rows.iter().all(|x| x.converged) && worst <= 1e-6 && r.sup_decreasing && r.hs_decreasing;
        let sup: Vec<String> = r.rows.iter().map(|x| format!("{:.2e}", x.sup_relative)).collect();
        let hs: Vec<String> = r.rows.iter().map(|x| format!("{:.2e}", x.resolvent_hs2)).collect();
        grid.push(format!("κ={kappa}: residual ≤ {worst:.0e}, sup [{}], HS² [{}]", sup.join(" "), hs.join(" ")));
    }
    verdict(ok, format!("homogeneous residual {hom_res:.0e}, recovery {hom_err:.0e}; {}", grid.join("; ")))
}

fn classical_stability() -> Result<Verdict> {
    let w = InteractionSpec::new([(vec![0, 0], 1.0), (vec![1, 0], 0.5), (vec![-1, 0], 0.5), (vec![0, 1], 0.5), (vec![0, -1], 0.5)])?;
    let r = cauchy_diagnostic(2, 1.0, &[100.0, 400.0, 1600.0], &w, 20_000, 5)?;
    let diffs: Vec<String> = r.mean_abs_diff.iter().zip(&r.stderr).map(|(m, e)| format!("{m:.4}±{e:.4}")).collect();
    verdict(r.decreasing && r.min_dk >= 0.0, format!("K = {:?}: E|D_K′ − D_K| = {}; min D_K = {:.2e}", r.dims, diffs.join(", "), r.min_dk))
}

fn main() {
    let start = Instant::now();
    let desk = desk_run();
    let desk_secs = start.elapsed().as_secs_f64();
    let with_desk = |f: fn(&Desk) -> Result<Verdict>| match &desk {
        Ok(d) => f(d),
        Err(e) => Err(e.clone()),
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Result<Verdict>>)> = vec![
        ("quasi-free exactness", Box::new(quasi_free_exactness)),
        ("Wick variance identity", Box::new(wick_variance)),
        ("single-mode semiclassical limit", Box::new(single_mode_limit)),
        ("density-matrix limit", Box::new(move || with_desk(density_matrix_limit))),
        ("relative-number convergence", Box::new(move || with_desk(relative_number_limit))),
        ("free-gas expansions", Box::new(free_gas_expansions)),
        ("inequality suites", Box::new(inequality_suites)),
        ("counter-term", Box::new(counter_term)),
        ("classical renormalization stability", Box::new(classical_stability)),
    ];
    println!("desk-scale convergence run (criteria 4, 5): {desk_secs:.1} s");
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("criterion {} [{}] {name}: {detail} [{:.1} s]", i + 1, if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {}/{} criteria passed in {:.1} s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
