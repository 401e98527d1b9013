use std::hint::black_box;

use bflow_bench::{fixtures, short_run};
use bflow_core::orbits::phase_portrait;
use bflow_core::{hamiltonian_vector_field, integrate, IntegratorConfig, PhaseState};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn vector_field(c: &mut Criterion) {
    let mut group = c.benchmark_group("vector_field");
    for f in fixtures() {
        group.bench_function(f.name, |b| {
            b.iter(|| {
                hamiltonian_vector_field(&f.structure, &f.hamiltonian, black_box(&f.initial))
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn integration(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrate");
    let fixed = short_run();
    let adaptive = IntegratorConfig::adaptive(fixed.t_max);
    for f in fixtures() {
        for (label, config) in [("rk4", &fixed), ("adaptive", &adaptive)] {
            group.bench_with_input(BenchmarkId::new(f.name, label), config, |b, config| {
                b.iter(|| {
                    integrate(&f.structure, &f.hamiltonian, black_box(&f.initial), config).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn portrait(c: &mut Criterion) {
    let f = &fixtures()[0];
    let grid: Vec<_> = (-3..=7)
        .flat_map(|i| [1.0, -1.0].map(|p| PhaseState::planar(f64::from(i), p)))
        .collect();
    let config = short_run();
    c.bench_function("phase_portrait/stokes_22", |b| {
        b.iter(|| phase_portrait(&f.structure, &f.hamiltonian, black_box(&grid), &config).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = vector_field, integration, portrait
}
criterion_main!(benches);
