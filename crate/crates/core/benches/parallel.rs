//! Parallel vs single-threaded throughput of the data-parallel kernels.
//! The "threads=1" arm runs the same code inside a one-thread rayon pool;
//! building with `--no-default-features` compiles the sequential fallback
//! instead, where both arms coincide.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use neckglue::geometry::Axis;
use neckglue::interaction::gamma_by_quadrature;
use neckglue::jacobi::{jacobi_field, linearized_apply, neck_field_grid, JacobiKind};
use neckglue::neck::{self, NeckParams};
use neckglue::quadrature::QuadratureRule;
use neckglue::Configuration;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut v = vec![(
        "threads=1".to_string(),
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap(),
    )];
    if all > 1 {
        v.push((
            format!("threads={all}"),
            rayon::ThreadPoolBuilder::new()
                .num_threads(all)
                .build()
                .unwrap(),
        ));
    }
    v
}

fn curvature(c: &mut Criterion) {
    let params = NeckParams::unit(3).unwrap();
    let patch = neck::neck_patch_t(
        &params,
        Axis::with_step(-1.0, 1.0, 0.05),
        neck::sphere_axes(3, 48, 96),
    )
    .unwrap();
    let mut g = c.benchmark_group("curvature_sweep");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| black_box(patch.curvature_sweep().sup)))
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let cfg = Configuration::flagship();
    let mut g = c.benchmark_group("monte_carlo_gamma");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                pool.install(|| {
                    let rule = QuadratureRule::monte_carlo(3, 200_000, 1).unwrap();
                    black_box(gamma_by_quadrature(&cfg, 0, 1, &rule).value)
                })
            })
        });
    }
    g.finish();
}

fn linearized(c: &mut Criterion) {
    let grid = neck_field_grid(
        0.25,
        0.8,
        49,
        vec![Axis::closed(0.5, 1.3, 49), Axis::closed(0.2, 1.0, 49)],
    );
    let field = jacobi_field(&JacobiKind::Dilation(1.0), 3, grid).unwrap();
    let mut g = c.benchmark_group("linearized_apply");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| black_box(linearized_apply(&field).unwrap().sup_norm())))
        });
    }
    g.finish();
}

criterion_group!(benches, curvature, monte_carlo, linearized);
criterion_main!(benches);
