use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use osc_color::matrices::{eigendecompose, DEFAULT_EPS_EIG};
use osc_color::{
    block_cover_cyclic, build_system, color_graph, simulate_exact, simulate_instantaneous,
    OscParams, PipelineConfig,
};
use osc_color_bench::{prototypical, random_graph, scrambled_order, Fixture};

fn matrices(c: &mut Criterion) {
    let p = OscParams::default();
    let mut group = c.benchmark_group("matrices");
    for n in [15, 60, 120] {
        let g = random_graph(n, 0.3);
        group.bench_with_input(BenchmarkId::new("build_system", n), &g, |b, g| {
            b.iter(|| build_system(black_box(g), &p).unwrap())
        });
        let sys = build_system(&g, &p).unwrap();
        group.bench_with_input(BenchmarkId::new("eigendecompose", n), &sys.b, |b, m| {
            b.iter(|| eigendecompose(black_box(m), DEFAULT_EPS_EIG).unwrap())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    for sizes in [vec![3, 3, 3], vec![5, 5, 5]] {
        let f = Fixture::new(prototypical(&sizes), 20.0);
        let id = format!("{sizes:?}");
        group.bench_function(BenchmarkId::new("exact", &id), |b| {
            b.iter(|| simulate_exact(&f.system, black_box(&f.x0), &f.sim).unwrap())
        });
        group.bench_function(BenchmarkId::new("instantaneous", &id), |b| {
            b.iter(|| {
                simulate_instantaneous(&f.system, black_box(&f.x0), usize::MAX, &f.sim).unwrap()
            })
        });
    }
    group.finish();
}

fn sorting(c: &mut Criterion) {
    let mut group = c.benchmark_group("block_cover_cyclic");
    for n in [50, 200, 500] {
        let g = random_graph(n, 0.1);
        let order = scrambled_order(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &order, |b, o| {
            b.iter(|| block_cover_cyclic(&g, black_box(o)).unwrap())
        });
    }
    group.finish();
}

fn end_to_end(c: &mut Criterion) {
    let g = prototypical(&[5, 5, 5]);
    let p = OscParams::default();
    let cfg = PipelineConfig::for_graph(&g, &p, 100.0, 7);
    let mut group = c.benchmark_group("color_graph");
    group.sample_size(10);
    group.bench_function("K(5,5,5)", |b| {
        b.iter(|| color_graph(black_box(&g), &p, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, matrices, simulation, sorting, end_to_end);
criterion_main!(benches);
