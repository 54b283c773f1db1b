use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ncreg::solvers::{fit_penalized_logistic, fit_penalized_ls};
use ncreg::{Algorithm, PenaltySpec, SolverConfig};
use ncreg_bench::{classification, regression};

fn bench_ls(c: &mut Criterion) {
    let data = regression(200, 20, 1);
    let specs = [
        PenaltySpec::l1(40.0).unwrap(),
        PenaltySpec::laplace(40.0, 0.01).unwrap(),
        PenaltySpec::arctan(40.0, 1.0).unwrap(),
        PenaltySpec::scad(40.0, 3.7).unwrap(),
    ];
    let mut g = c.benchmark_group("fit_ls_200x20");
    for spec in &specs {
        for alg in [Algorithm::Cgd, Algorithm::Dca] {
            let cfg = SolverConfig::default().with_algorithm(alg);
            g.bench_with_input(BenchmarkId::new(spec.kind().name(), format!("{alg:?}")), &cfg, |b, cfg| {
                b.iter(|| fit_penalized_ls(&data, spec, cfg).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_logistic(c: &mut Criterion) {
    let data = classification(200, 10, 2);
    let spec = PenaltySpec::laplace(5.0, 0.01).unwrap();
    let cfg = SolverConfig { tol: 1e-9, ..SolverConfig::default() };
    c.bench_function("fit_logistic_200x10/laplace", |b| b.iter(|| fit_penalized_logistic(&data, &spec, &cfg).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_ls, bench_logistic
}
criterion_main!(benches);
