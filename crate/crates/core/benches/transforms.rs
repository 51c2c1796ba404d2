use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use weakshock::cwt::{gradient_transform, Method, TransformOptions};
use weakshock::exec::Exec;
use weakshock::pipeline::{solve, PipelineConfig};
use weakshock::solver::solve_on_grid_with;
use weakshock::wtmm::find_maxima_2d_with;

fn modes() -> Vec<(&'static str, Exec)> {
    let mut v = vec![("sequential", Exec::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Exec::Parallel));
    v
}

fn reference() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.grid.n = 512;
    cfg.grid.m = 128;
    cfg
}

fn bench_solve(c: &mut Criterion) {
    let cfg = reference();
    let grid = cfg.grid.build().unwrap();
    let problem = cfg.problem.build(grid.x()).unwrap();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| solve_on_grid_with(black_box(&problem), &grid, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_gradient(c: &mut Criterion) {
    let cfg = reference();
    let field = solve(&cfg).unwrap();
    let sigma = 4.0 * field.grid().dx();
    let mut group = c.benchmark_group("gradient_transform");
    for method in [Method::Direct, Method::Fft] {
        for (name, exec) in modes() {
            let opts = TransformOptions::default()
                .with_method(method)
                .with_exec(exec);
            group.bench_with_input(
                BenchmarkId::new(format!("{method:?}"), name),
                &opts,
                |b, opts| b.iter(|| gradient_transform(black_box(&field), sigma, opts).unwrap()),
            );
        }
    }
    group.finish();
}

fn bench_maxima(c: &mut Criterion) {
    let cfg = reference();
    let field = solve(&cfg).unwrap();
    let gf = gradient_transform(
        &field,
        4.0 * field.grid().dx(),
        &TransformOptions::default(),
    )
    .unwrap();
    let mut group = c.benchmark_group("find_maxima_2d");
    for (name, exec) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| find_maxima_2d_with(black_box(&gf), 0.1, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_solve, bench_gradient, bench_maxima);
criterion_main!(benches);
