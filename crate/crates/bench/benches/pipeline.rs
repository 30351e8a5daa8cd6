use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quadelas::assembly::assemble_mixed;
use quadelas::solver::solve;
use quadelas::{Compliance, LameParams, MeshFamily, MixedSpaces, SolveOptions, StressFamily, TrigSolution};

const FAMILIES: [StressFamily; 3] = [StressFamily::Rt(2), StressFamily::Rt(3), StressFamily::Bdm1];

fn spaces(family: StressFamily, n: usize) -> MixedSpaces {
    MixedSpaces::new(Arc::new(MeshFamily::default().build(n).unwrap()), family).unwrap()
}

fn assembly(c: &mut Criterion) {
    let params = LameParams::default();
    let exact = TrigSolution::new(params);
    let mut group = c.benchmark_group("assemble");
    for family in FAMILIES {
        let sp = spaces(family, 16);
        group.bench_with_input(BenchmarkId::new(family.name(), 16), &sp, |b, sp| {
            b.iter(|| assemble_mixed(black_box(sp), &Compliance::new(params), &exact, None).unwrap())
        });
    }
    group.finish();
}

fn factor_and_solve(c: &mut Criterion) {
    let params = LameParams::default();
    let exact = TrigSolution::new(params);
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for (family, n) in [(StressFamily::Rt(2), 16), (StressFamily::Rt(2), 32), (StressFamily::Bdm1, 32)] {
        let sys = assemble_mixed(&spaces(family, n), &Compliance::new(params), &exact, None).unwrap();
        group.bench_with_input(BenchmarkId::new(family.name(), n), &sys, |b, sys| {
            b.iter(|| solve(black_box(sys), &SolveOptions::default()).unwrap())
        });
    }
    let sys = assemble_mixed(&spaces(StressFamily::Bdm1, 8), &Compliance::new(params), &exact, None).unwrap();
    group.bench_function("dense/bdm1/8", |b| b.iter(|| solve(black_box(&sys), &SolveOptions::dense()).unwrap()));
    group.finish();
}

fn spaces_build(c: &mut Criterion) {
    c.bench_function("spaces/rt2/32", |b| b.iter(|| spaces(black_box(StressFamily::Rt(2)), 32)));
}

criterion_group!(benches, assembly, factor_and_solve, spaces_build);
criterion_main!(benches);
