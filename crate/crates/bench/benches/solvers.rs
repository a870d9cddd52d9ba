use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use steklov_bench::{ellipse_mesh, plane, spheroid, weight};
use steklov_core::axisym3d::mode_eigenvalues;
use steklov_core::radial::{sigma1_ball, solve_mode};
use steklov_core::steklov2d::{assemble, dtn_reduce, mesh_spectrum};
use steklov_core::{RadialConfig, SpaceForm};

fn radial(c: &mut Criterion) {
    let cfg = RadialConfig::default();
    let w = weight();
    let mut g = c.benchmark_group("radial");
    for n in [2usize, 3, 5] {
        let form = SpaceForm::euclidean(n);
        g.bench_with_input(BenchmarkId::new("sigma1_ball", n), &form, |b, f| {
            b.iter(|| sigma1_ball(f, &w, black_box(1.0), &cfg).unwrap())
        });
    }
    let h = SpaceForm::hyperbolic(2);
    g.bench_function("solve_mode_degree4_hyperbolic", |b| b.iter(|| solve_mode(&h, &w, 4, black_box(1.0), &cfg).unwrap()));
    g.finish();
}

fn planar(c: &mut Criterion) {
    let form = plane();
    let w = weight();
    let mut g = c.benchmark_group("planar");
    g.sample_size(10);
    for level in 0..2 {
        let mesh = ellipse_mesh(level);
        let sys = assemble(&mesh, &form, &w).unwrap();
        g.bench_with_input(BenchmarkId::new("assemble", level), &mesh, |b, m| b.iter(|| assemble(m, &form, &w).unwrap()));
        g.bench_with_input(BenchmarkId::new("dtn_reduce", level), &sys, |b, s| b.iter(|| dtn_reduce(s).unwrap()));
        g.bench_with_input(BenchmarkId::new("spectrum", level), &mesh, |b, m| {
            b.iter(|| mesh_spectrum(m, &form, &w, 4, "ellipse").unwrap())
        });
    }
    g.finish();
}

fn axisym(c: &mut Criterion) {
    let w = weight();
    let dom = spheroid(0);
    let mut g = c.benchmark_group("axisym");
    g.sample_size(10);
    for m in [0usize, 1, 2] {
        g.bench_with_input(BenchmarkId::new("mode", m), &m, |b, &m| b.iter(|| mode_eigenvalues(&dom, &w, m, 3).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, radial, planar, axisym);
criterion_main!(benches);
