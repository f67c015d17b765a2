//! Pipeline stages on the ellipse D-form at increasing seam resolution.

use std::f64::consts::TAU;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use seamform::analysis::{default_bend_threshold, extract_bend_loci, hull_of_seam_gap};
use seamform::gluing::make_dform;
use seamform::metric::triangulate;
use seamform::reconstruct::reconstruct;
use seamform::{ConeMetric, GluedBoundary, MeshOptions, PlanarCurve, ReconstructOptions};

fn ellipse_dform(n: usize) -> GluedBoundary {
    let c = PlanarCurve::ellipse(2.0, 1.0).unwrap();
    make_dform(&c, &c, c.perimeter() / 4.0, n).unwrap().normalized().unwrap()
}

fn metric(n: usize) -> ConeMetric {
    triangulate(&ellipse_dform(n), &MeshOptions::with_density(4.0 * TAU / n as f64)).unwrap()
}

fn bench_triangulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("triangulate");
    for n in [100, 200, 400] {
        let g = ellipse_dform(n);
        let opts = MeshOptions::with_density(4.0 * TAU / n as f64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| triangulate(black_box(&g), &opts).unwrap()));
    }
    group.finish();
}

fn bench_reconstruct(c: &mut Criterion) {
    let mut group = c.benchmark_group("reconstruct");
    group.sample_size(10);
    let opts = ReconstructOptions { fallback: false, ..Default::default() };
    for n in [100, 200] {
        let m = metric(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| reconstruct(black_box(&m), &opts).unwrap()));
    }
    group.finish();
}

fn bench_analysis(c: &mut Criterion) {
    let m = metric(200);
    let e = reconstruct(&m, &ReconstructOptions::default()).unwrap();
    let tau = default_bend_threshold(&e, &m);
    c.bench_function("bend_loci/200", |b| b.iter(|| extract_bend_loci(black_box(&e), &m, tau)));
    c.bench_function("hull_gap/200", |b| b.iter(|| hull_of_seam_gap(black_box(&e), &m).unwrap()));
}

criterion_group!(benches, bench_triangulate, bench_reconstruct, bench_analysis);
criterion_main!(benches);
