use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use multisweep::{oracle::CentralizedOptions, Algorithm, HessianMode, Mode, SolverOptions};
use multisweep_bench::{
    busiest_node, feeder_instance, fixed_sweeps, nonconvex_instance, quadratic_instance,
    start_point,
};

fn synchronous_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sync_alg2_3_sweeps");
    for n in [10, 50, 200] {
        let problem = quadratic_instance(n, 1);
        let cfg = fixed_sweeps(Mode::Sync, 3, HessianMode::Exact);
        group.bench_with_input(BenchmarkId::from_parameter(n), &problem, |b, p| {
            b.iter(|| multisweep::run(p, &Algorithm::Alg2, &cfg).unwrap())
        });
    }
    group.finish();
}

fn asynchronous_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("async_alg2_3_sweeps");
    for n in [10, 50] {
        let problem = nonconvex_instance(n, 2);
        let mut cfg = fixed_sweeps(Mode::Async, 3, HessianMode::Exact);
        cfg.delays.skewed = true;
        group.bench_with_input(BenchmarkId::from_parameter(n), &problem, |b, p| {
            b.iter(|| multisweep::run(p, &Algorithm::Alg2, &cfg).unwrap())
        });
    }
    group.finish();
}

fn local_sensitivity(c: &mut Criterion) {
    let problem = feeder_instance(7);
    let (i, models) = busiest_node(&problem);
    let k = problem.tree().neighbors(i)[0];
    let y = start_point(&problem, i);
    let p_bar = problem.coupling(i, k) * &y;
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("feeder_local");
    for (name, mode) in [
        ("exact", HessianMode::Exact),
        ("gauss_newton", HessianMode::GaussNewton),
    ] {
        group.bench_function(BenchmarkId::new("solve_node", name), |b| {
            b.iter(|| {
                multisweep::solve_node(&problem, i, &models, black_box(&y), mode, &opts).unwrap()
            })
        });
        group.bench_function(BenchmarkId::new("sensitivity", name), |b| {
            b.iter(|| {
                multisweep::sensitivity(&problem, i, &models, k, black_box(&p_bar), &y, mode, &opts)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn feeder_estimation(c: &mut Criterion) {
    let problem = feeder_instance(7);
    let mut group = c.benchmark_group("feeder_estimation");
    group.sample_size(10);
    for (name, mode) in [
        ("exact", HessianMode::Exact),
        ("gauss_newton", HessianMode::GaussNewton),
    ] {
        let cfg = fixed_sweeps(Mode::Sync, 5, mode);
        group.bench_function(BenchmarkId::new("alg2_5_sweeps", name), |b| {
            b.iter(|| multisweep::run(&problem, &Algorithm::Alg2, &cfg).unwrap())
        });
    }
    group.bench_function("centralized", |b| {
        b.iter(|| multisweep::centralized_solve(&problem, &CentralizedOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    synchronous_sweeps,
    asynchronous_sweeps,
    local_sensitivity,
    feeder_estimation
);
criterion_main!(benches);
