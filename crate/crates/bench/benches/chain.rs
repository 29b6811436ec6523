use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gslh_bench::{largest_gz2, mc2_system, small_g, strict_system};
use gslh_core::chain::{run_chain, ChainConfig, Target};
use gslh_core::geometry::{embed_truss, system_to_tv};
use gslh_core::integerize::integerize;
use gslh_core::ipm::merge_duplicate_rows;
use gslh_core::lsd::{bidiagonal_instance, iterative_solve};
use gslh_core::mc2::reduce_gz2_to_mc2;
use gslh_core::oracle::solve_dense;
use gslh_core::strictify::strictify;
use gslh_core::ReduceOptions;

//
// Individual stages
//

fn stages(c: &mut Criterion) {
    let g = largest_gz2();
    c.bench_function("reduce_gz2_to_mc2", |b| b.iter(|| reduce_gz2_to_mc2(black_box(&g), 1.0).unwrap()));

    let (mc2, eps) = mc2_system();
    let opts = ReduceOptions::default();
    c.bench_function("strictify", |b| b.iter(|| strictify(black_box(&mc2), eps, &opts).unwrap()));
    c.bench_function("merge_duplicate_rows", |b| b.iter(|| merge_duplicate_rows(black_box(&mc2))));
    c.bench_function("system_to_tv", |b| b.iter(|| system_to_tv(black_box(&mc2)).unwrap()));

    let (_, cert) = reduce_gz2_to_mc2(&g, 1.0).unwrap();
    c.bench_function("embed_truss", |b| b.iter(|| embed_truss(black_box(&mc2), &cert, 0).unwrap()));

    let (strict, eps) = strict_system();
    c.bench_function("integerize", |b| b.iter(|| integerize(black_box(&strict), eps).unwrap()));
}

//
// Whole chain
//

fn chain(c: &mut Criterion) {
    let g = small_g();
    let mut group = c.benchmark_group("run_chain");
    for target in [Target::Mc2, Target::Mc2StrictInt] {
        let cfg = ChainConfig { target, ..ChainConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(target), &cfg, |b, cfg| {
            b.iter(|| run_chain(black_box(&g), cfg).unwrap())
        });
    }
    group.finish();
}

//
// Solvers
//

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("bidiagonal");
    for n in [10usize, 100, 400] {
        let inst = bidiagonal_instance(n, 1e-2).unwrap();
        group.bench_with_input(BenchmarkId::new("dense_oracle", n), &inst, |b, inst| {
            b.iter(|| solve_dense(&inst.matrix, &inst.rhs, 2000).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cgls", n), &inst, |b, inst| {
            b.iter(|| iterative_solve(&inst.matrix, &inst.rhs, 1e-10).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stages, chain, solvers);
criterion_main!(benches);
