use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use cpe_core::erm::{empirical_risk_minimizer, sample, true_risk_minimizer, FeatureMap};
use cpe_core::harness::{reference_log_problem, run_convergence, three_point_problem, ConvergenceConfig};

fn true_risk(c: &mut Criterion) {
    let mut group = c.benchmark_group("true_risk_minimizer");
    let problem = reference_log_problem();
    for loss in ["sq", "log", "sqh"] {
        group.bench_with_input(BenchmarkId::from_parameter(loss), &loss, |b, &loss| {
            b.iter(|| true_risk_minimizer(black_box(&problem), loss).unwrap())
        });
    }
    // the squared hinge minimizer set is a ray here; exercises the active-set path
    let three = three_point_problem();
    group.bench_function("sqh_three_point", |b| b.iter(|| true_risk_minimizer(black_box(&three), "sqh").unwrap()));
    group.finish();
}

fn empirical_risk(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_risk_minimizer");
    let problem = reference_log_problem();
    for n in [1_000usize, 100_000] {
        let s = sample(&problem, n, 1).unwrap();
        group.bench_with_input(BenchmarkId::new("log", n), &s, |b, s| {
            b.iter(|| empirical_risk_minimizer(black_box(s), "log", FeatureMap::Affine).unwrap())
        });
    }
    group.finish();
}

fn convergence(c: &mut Criterion) {
    let cfg = ConvergenceConfig {
        problem: reference_log_problem(),
        loss_name: "log".into(),
        sample_sizes: vec![100, 1_000, 10_000],
        repetitions: 50,
        epsilons: vec![0.05, 0.1],
        root_seed: 42,
        misspecified: false,
    };
    let mut group = c.benchmark_group("convergence");
    group.sample_size(10);
    group.bench_function("log_50_reps", |b| b.iter(|| run_convergence(black_box(&cfg)).unwrap()));
    group.finish();
}

criterion_group!(benches, true_risk, empirical_risk, convergence);
criterion_main!(benches);
