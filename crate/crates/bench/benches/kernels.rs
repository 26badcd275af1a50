use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use nlgibbs::counterterm::{GridProblem, GridSpec};
use nlgibbs::fock::{enumerate_fock, gibbs, hamiltonian};
use nlgibbs::ineq::{run_suite, Suite};
use nlgibbs::measure::estimate_z;
use nlgibbs::spectral::{build_torus_basis, InteractionSpec};
use nlgibbs::thermo::{lattice_occupation, phi_d, PhiRepresentation};

fn desk() -> (nlgibbs::ModeBasis, InteractionSpec) {
    let basis = build_torus_basis(1, 10.0, 10.0 + 4.0 * PI * PI + 1.0).unwrap();
    let w = InteractionSpec::new([(vec![0], 100.0), (vec![1], 50.0), (vec![-1], 50.0)]).unwrap();
    (basis, w)
}

fn fock(c: &mut Criterion) {
    let (basis, w) = desk();
    let model = enumerate_fock(&basis, 20).unwrap();
    c.bench_function("hamiltonian K=3 n_max=20", |b| b.iter(|| hamiltonian(black_box(&model), &w, 0.05).unwrap()));
    let h = hamiltonian(&model, &w, 0.05).unwrap();
    c.bench_function("gibbs K=3 n_max=20", |b| b.iter(|| gibbs(black_box(&model), &h, 0.05).unwrap()));
    let ens = gibbs(&model, &h, 0.05).unwrap();
    c.bench_function("reduced_dm k=2 K=3 n_max=20", |b| b.iter(|| ens.reduced_dm(2).unwrap()));
}

fn measure(c: &mut Criterion) {
    let (basis, w) = desk();
    c.bench_function("estimate_z 1e5 samples", |b| b.iter(|| estimate_z(black_box(&basis), &w, 100_000, 1).unwrap()));
}

fn thermo(c: &mut Criterion) {
    c.bench_function("lattice_occupation d=3 λ=1e-3", |b| b.iter(|| lattice_occupation(3, black_box(1.0), 1e-3, 1e-12).unwrap()));
    c.bench_function("phi_3 green sum", |b| b.iter(|| phi_d(3, black_box(1.0), PhiRepresentation::GreenSum).unwrap()));
}

fn counterterm(c: &mut Criterion) {
    let w = |r: f64| (-r * r / 0.5).exp() / (0.5 * PI).sqrt();
    let p = GridProblem::new(GridSpec { half_width: 6.0, n_points: 119 }, |x| x * x, w, 5.0).unwrap();
    c.bench_function("grid counter-term n=119 λ=0.1", |b| b.iter(|| p.solve_lambda(black_box(0.1), 0.5, 1e-8, 500).unwrap()));
}

fn ineq(c: &mut Criterion) {
    let mut g = c.benchmark_group("inequality suites");
    g.sample_size(10);
    g.bench_function("s_variance 50 instances", |b| b.iter(|| run_suite(Suite::SVariance, 50, black_box(7), 0).unwrap()));
    g.bench_function("derivative 50 instances", |b| b.iter(|| run_suite(Suite::Derivative, 50, black_box(7), 0).unwrap()));
    g.finish();
}

criterion_group!(benches, fock, measure, thermo, counterterm, ineq);
criterion_main!(benches);
