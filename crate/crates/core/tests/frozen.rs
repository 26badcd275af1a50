//! Seeded outputs frozen at known-good values; any drift in sampling,
//! quadrature or iteration order shows up here first.

use std::f64::consts::PI;

use nlgibbs::counterterm::{GridProblem, GridSpec};
use nlgibbs::experiment::{classical_targets, convergence_row};
use nlgibbs::fock::NmaxPolicy;
use nlgibbs::measure::cauchy_diagnostic;
use nlgibbs::spectral::{build_torus_basis, InteractionSpec};

fn close(got: f64, want: f64) {
    assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-3), "got {got:.17e}, frozen {want:.17e}");
}

#[test]
fn desk_convergence_row() {
    let basis = build_torus_basis(1, 10.0, 10.0 + 4.0 * PI * PI + 1.0).unwrap();
    let w = InteractionSpec::new([(vec![0], 100.0), (vec![1], 50.0), (vec![-1], 50.0)]).unwrap();
    let t = classical_targets(&basis, &w, 100_000, 42).unwrap();
    let row = convergence_row(&basis, &w, 0.05, &NmaxPolicy::default(), &t).unwrap();
    close(t.log_z, -4.34641032685500417e-1);
    close(t.relative_number.mean, -2.57374618399301945e-2);
    close(row.log_ratio, -4.36939724312502831e-1);
    close(row.hs_dm1, 3.47035261943592424e-2);
    close(row.hs_dm2, 7.15669077094516909e-3);
    close(row.relative_number, -2.94134094291541720e-2);
}

#[test]
fn grid_counterterm_harmonic() {
    let w = |r: f64| (-r * r / 0.5).exp() / (0.5 * PI).sqrt();
    let p = GridProblem::new(GridSpec { half_width: 6.0, n_points: 59 }, |x| x * x, w, 5.0).unwrap();
    let s = p.solve_lambda(0.1, 0.5, 1e-12, 500).unwrap();
    let l = p.solve_limit(0.5, 1e-12, 500).unwrap();
    assert_eq!((s.iterations, l.iterations), (37, 38));
    close(s.v[29], 4.99583674536082611e0);
    close(s.v[10], 1.93535735944772753e1);
    close(l.v[29], 4.99339179574523850e0);
    close(l.v[10], 1.93270214557910656e1);
}

#[test]
fn cauchy_two_dimensional() {
    let w = InteractionSpec::new([(vec![0, 0], 1.0), (vec![1, 0], 0.5), (vec![-1, 0], 0.5), (vec![0, 1], 0.5), (vec![0, -1], 0.5)]).unwrap();
    let r = cauchy_diagnostic(2, 1.0, &[100.0, 400.0, 1600.0], &w, 4096, 5).unwrap();
    close(r.mean_abs_diff[0], 1.45860046109431690e-2);
    close(r.mean_abs_diff[1], 6.98538794697594907e-3);
    close(r.min_dk, 1.92851353185486589e-3);
}
