use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kusuoka::ifs::harmonic_gasket;
use kusuoka::transfer::{dense_spectrum, perron, pressure_root, DEFAULT_MAX_ITER, DEFAULT_TOL};
use kusuoka::{BlockOperator, Potential};

fn memory2() -> Potential {
    Potential::from_fn(3, 2, |w| 0.2 * w[0] as f64 - 0.1 * w[1] as f64, "m2").unwrap()
}

fn spectral(c: &mut Criterion) {
    let ifs = harmonic_gasket();
    for (name, v) in [("memory1", Potential::zero(3)), ("memory2", memory2())] {
        let b = BlockOperator::new(&ifs, 1, &v).unwrap();
        c.bench_function(&format!("perron/{name}"), |bn| {
            bn.iter(|| perron(black_box(&b), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap())
        });
        c.bench_function(&format!("dense_spectrum/{name}"), |bn| bn.iter(|| dense_spectrum(black_box(&b))));
    }
    let vhat = memory2().shifted(1.0);
    let b = BlockOperator::new(&ifs, 1, &vhat).unwrap();
    c.bench_function("pressure_root/memory2", |bn| {
        bn.iter(|| pressure_root(black_box(&b), &vhat, 1e-12).unwrap())
    });
}

criterion_group!(benches, spectral);
criterion_main!(benches);
