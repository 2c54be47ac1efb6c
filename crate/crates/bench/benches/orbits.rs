use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kusuoka::ifs::{harmonic_gasket, rotation_family};
use kusuoka::orbits::{counting_tables, orbit_records, trace_powers};
use kusuoka::symbolic::DEFAULT_BUDGET;
use kusuoka::{BlockOperator, Potential};

fn orbits(c: &mut Criterion) {
    let g = harmonic_gasket();
    let fam = g.push_forward_family(1).unwrap();
    let zero = Potential::zero(3);
    let mut group = c.benchmark_group("orbits");
    group.sample_size(10);
    group.bench_function("orbit_records/gasket/p10", |bn| {
        bn.iter(|| orbit_records(black_box(&fam), &zero, 10, DEFAULT_BUDGET).unwrap())
    });
    let rot = rotation_family(0.9, 3).unwrap();
    let rfam = rot.push_forward_family(1).unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let vhat = Potential::from_table(3, 1, vec![1.0, phi, phi], "nonlattice").unwrap();
    let grid: Vec<f64> = (0..200).map(|j| (1.0 + 8.0 * j as f64 / 199.0).exp()).collect();
    group.bench_function("counting_tables/rotation/p10", |bn| {
        bn.iter(|| counting_tables(black_box(&rfam), &vhat, Some(0.64), 10, &grid, DEFAULT_BUDGET).unwrap())
    });
    group.finish();
    let b = BlockOperator::new(&g, 1, &zero).unwrap();
    c.bench_function("trace_powers/gasket/400", |bn| bn.iter(|| trace_powers(black_box(&b), 400)));
}

criterion_group!(benches, orbits);
criterion_main!(benches);
