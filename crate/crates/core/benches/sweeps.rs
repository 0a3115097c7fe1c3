use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rayon::ThreadPoolBuilder;

use hannay_core::actionangle::Numerics;
use hannay_core::dynamics::{dynamical_hannay, DriftProtocol};
use hannay_core::family::GenOsc;
use hannay_core::holonomy::{hannay_angle_line, hannay_angle_surface, LoopPath, SurfacePatch};

fn tilted() -> LoopPath {
    LoopPath::ellipse(vec![1.5, 0.3, 1.5], vec![0.3, 0.0, -0.1], vec![0.0, 0.2, 0.2], 32).unwrap()
}

fn sweeps(c: &mut Criterion) {
    let num = Numerics::default();
    let path = tilted();
    let surf = SurfacePatch::spanning(&path, 16, 16).unwrap();
    let protocol = DriftProtocol {
        epsilons: vec![4e-2, 2e-2],
        phases: 8,
        tolerance: 1.0,
        ..DriftProtocol::default()
    };
    let serial = ThreadPoolBuilder::new().num_threads(1).build().unwrap();

    let mut g = c.benchmark_group("surface_16x16");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| hannay_angle_surface(&GenOsc, black_box(&surf), 1.0, &num).unwrap()));
    g.bench_function("one_thread", |b| {
        b.iter(|| serial.install(|| hannay_angle_surface(&GenOsc, black_box(&surf), 1.0, &num).unwrap()))
    });
    g.finish();

    let mut g = c.benchmark_group("line_32");
    g.bench_function("parallel", |b| b.iter(|| hannay_angle_line(&GenOsc, black_box(&path), 1.0, &num).unwrap()));
    g.bench_function("one_thread", |b| {
        b.iter(|| serial.install(|| hannay_angle_line(&GenOsc, black_box(&path), 1.0, &num).unwrap()))
    });
    g.finish();

    let mut g = c.benchmark_group("dynamics_2x8");
    g.sample_size(10);
    g.bench_function("parallel", |b| {
        b.iter(|| dynamical_hannay(&GenOsc, black_box(&path), 1.0, &protocol, &num).unwrap())
    });
    g.bench_function("one_thread", |b| {
        b.iter(|| serial.install(|| dynamical_hannay(&GenOsc, black_box(&path), 1.0, &protocol, &num).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
