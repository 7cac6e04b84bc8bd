use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use cpe_core::loss::{composite, cpe_form, BuiltinLoss, LossSpec};
use cpe_core::properness::{audit_properness, check_disjoint_cover, estimate_delta, quadratic_bound_violations};

fn properness(c: &mut Criterion) {
    let mut group = c.benchmark_group("audit_properness");
    group.sample_size(20);
    for loss in ["sq", "log", "sqh"] {
        let cl = composite(loss).unwrap();
        group.bench_with_input(BenchmarkId::new(loss, "1e-3"), &cl, |b, cl| {
            b.iter(|| audit_properness(black_box(cl), 1e-3).unwrap())
        });
    }
    let hinge = LossSpec::builtin(BuiltinLoss::Hinge);
    group.bench_function("hinge_cover_1e-3", |b| b.iter(|| check_disjoint_cover(black_box(&hinge), 1e-3).unwrap()));
    group.finish();
}

fn delta(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_delta");
    group.sample_size(10);
    for step in [1e-3, 1e-4] {
        let cl = cpe_form("sq").unwrap();
        group.bench_with_input(BenchmarkId::new("sq_cpe", step), &step, |b, &step| {
            b.iter(|| estimate_delta(black_box(&cl), 0.1, step).unwrap())
        });
    }
    group.finish();
}

fn bound(c: &mut Criterion) {
    let cl = composite("log").unwrap();
    let mut group = c.benchmark_group("quadratic_bound");
    group.sample_size(10);
    group.bench_function("log_1e-3", |b| b.iter(|| quadratic_bound_violations(black_box(&cl), 2.0, 1e-3).unwrap()));
    group.finish();
}

criterion_group!(benches, properness, delta, bound);
criterion_main!(benches);
