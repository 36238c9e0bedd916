use boxcycle::dynamics::{integrate_two_level, TwoLevelCrossing};
use boxcycle::manybody::{enumerate_states, fock_hamiltonian, ModeSet};
use boxcycle::{holonomy, sample_flow, solve_levels, BoxParams, CycleSpec, WallConfig};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn spectrum(c: &mut Criterion) {
    let p = BoxParams::default();
    c.bench_function("solve_levels finite g=100 M=16", |b| {
        b.iter(|| solve_levels(&p, black_box(&WallConfig::finite(100.0, 0.4703)), 16).unwrap())
    });
    c.bench_function("solve_levels infinite M=16", |b| {
        b.iter(|| solve_levels(&p, black_box(&WallConfig::infinite(0.4703)), 16).unwrap())
    });
}

fn flow(c: &mut Criterion) {
    let p = BoxParams::default();
    let spec = CycleSpec::canonical(&p);
    c.bench_function("sample_flow M=4", |b| {
        b.iter(|| sample_flow(&p, black_box(&spec), 4).unwrap())
    });
    c.bench_function("holonomy M=8", |b| {
        b.iter(|| holonomy(&p, black_box(&spec), 8).unwrap())
    });
}

fn manybody(c: &mut Criterion) {
    let p = BoxParams::default();
    let wall = WallConfig::finite(5.0, 0.4703);
    c.bench_function("mode set integrals M=8", |b| {
        b.iter(|| ModeSet::new(&p, black_box(&wall), 8).unwrap())
    });
    let modes = ModeSet::new(&p, &wall, 8).unwrap();
    let basis = enumerate_states(3, 8).unwrap();
    c.bench_function("fock_hamiltonian N=3 cutoff=8", |b| {
        b.iter(|| fock_hamiltonian(&modes, 1.0, black_box(&basis)).unwrap())
    });
}

fn dynamics(c: &mut Criterion) {
    let crossing = TwoLevelCrossing::from_gamma(0.3).unwrap();
    let mut g = c.benchmark_group("dynamics");
    g.sample_size(10);
    g.bench_function("integrate_two_level gamma=0.3", |b| {
        b.iter(|| integrate_two_level(black_box(&crossing), 100.0 * crossing.gap).unwrap())
    });
    g.finish();
}

criterion_group!(benches, spectrum, flow, manybody, dynamics);
criterion_main!(benches);
