use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use satsbl::model::{apply_design, apply_design_transpose};
use satsbl::solver::{estep_x, estep_x_spectral};
use satsbl::{solve, CovarianceEngine, PriorKnowledgeSet, SolverConfig};
use satsbl_bench::{instance, mid_solve_state, random_vector, SHAPES};
use std::hint::black_box;

fn design_operator(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_design");
    for (name, m, n, k, l) in SHAPES {
        let inst = instance(m, n, k, l);
        let layout = inst.problem.layout();
        let x = random_vector(n * l);
        let r = random_vector(m * l);
        group.bench_function(BenchmarkId::new("forward", name), |b| {
            b.iter(|| apply_design(inst.problem.phi(), black_box(&x), &layout).unwrap())
        });
        group.bench_function(BenchmarkId::new("adjoint", name), |b| {
            b.iter(|| apply_design_transpose(inst.problem.phi(), black_box(&r), &layout).unwrap())
        });
    }
    group.finish();
}

fn posterior(c: &mut Criterion) {
    let mut group = c.benchmark_group("estep_x");
    let cfg = SolverConfig::default();
    for (name, m, n, k, l) in SHAPES {
        let inst = instance(m, n, k, l);
        let state = mid_solve_state(&inst, &cfg);
        group.bench_function(BenchmarkId::new("dense", name), |b| {
            b.iter(|| estep_x(&inst.problem, black_box(&state), &cfg).unwrap())
        });
        group.bench_function(BenchmarkId::new("spectral", name), |b| {
            b.iter(|| estep_x_spectral(&inst.problem, black_box(&state), &cfg).unwrap())
        });
    }
    group.finish();
}

fn full_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for (name, m, n, k, l) in SHAPES {
        let inst = instance(m, n, k, l);
        let known: Vec<usize> = inst.support_true.iter().copied().take(1).collect();
        let prior = PriorKnowledgeSet::from_one_based(&known, n).unwrap();
        for engine in [CovarianceEngine::Spectral, CovarianceEngine::Dense] {
            let cfg = SolverConfig {
                engine,
                ..Default::default()
            };
            let id = BenchmarkId::new(format!("{engine:?}").to_lowercase(), name);
            group.bench_function(id, |b| {
                b.iter(|| solve(&inst.problem, &prior, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, design_operator, posterior, full_solve);
criterion_main!(benches);
