use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ncreg::prox::{global_min_threshold, prox_oracle_default, prox_scalar};
use ncreg::PenaltySpec;

fn specs() -> Vec<PenaltySpec> {
    vec![
        PenaltySpec::l1(2.0).unwrap(),
        PenaltySpec::scad(2.0, 3.7).unwrap(),
        PenaltySpec::mcp(2.0, 1.5).unwrap(),
        PenaltySpec::laplace(2.0, 0.01).unwrap(),
        PenaltySpec::arctan(2.0, 1.0).unwrap(),
    ]
}

fn bench_prox(c: &mut Criterion) {
    let w_hats: Vec<f64> = (0..64).map(|i| -8.0 + 0.25 * i as f64).collect();
    let mut g = c.benchmark_group("prox_scalar");
    for spec in specs() {
        g.bench_function(spec.kind().name(), |b| {
            b.iter(|| {
                for &w in &w_hats {
                    black_box(prox_scalar(&spec, black_box(w)).unwrap().global_min);
                }
            })
        });
    }
    g.finish();

    let lap = PenaltySpec::laplace(2.0, 0.01).unwrap();
    c.bench_function("prox_oracle/laplace", |b| b.iter(|| prox_oracle_default(&lap, black_box(3.0)).unwrap()));
    c.bench_function("global_min_threshold/laplace", |b| b.iter(|| global_min_threshold(&lap, black_box(3.0)).unwrap()));
}

criterion_group!(benches, bench_prox);
criterion_main!(benches);
