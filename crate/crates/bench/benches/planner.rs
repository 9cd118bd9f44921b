use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use gatsbi_bench::{revealed, scattered_instance, tower};
use gatsbi_core::gtsp;
use gatsbi_core::rrtstar::{plan, PlanRequest};
use gatsbi_core::viewgen::{generate_clusters, CameraSet, Granularity, ViewConstraint};
use gatsbi_core::world::sense;
use gatsbi_core::{Pose, SensorModel, SolveBudget, Vec3};

fn gtsp_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("gtsp_solve");
    for n in [10, 40, 120] {
        let inst = scattered_instance(n, 4);
        g.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| gtsp::solve(black_box(inst), SolveBudget::default(), 7).unwrap())
        });
    }
    g.finish();
}

fn sensing(c: &mut Criterion) {
    let scene = tower(4, 10);
    let pose = Pose::new(Vec3::new(2.5, 2.5, 4.5), 45f64.to_radians());
    let model = SensorModel::default();
    c.bench_function("sense", |b| b.iter(|| sense(black_box(&scene), &pose, &model).unwrap()));
}

fn clusters(c: &mut Criterion) {
    let mut g = c.benchmark_group("generate_clusters");
    g.sample_size(20);
    let (env, infra) = revealed(&tower(3, 8));
    for gran in [Granularity::PerVoxel, Granularity::PerFace] {
        let view = ViewConstraint::new(20f64.to_radians(), 2.0, 5.0, CameraSet::ALL, gran).unwrap();
        g.bench_function(gran.label(), |b| {
            b.iter(|| generate_clusters(black_box(&env), &infra, &view))
        });
    }
    g.finish();
}

fn rrt(c: &mut Criterion) {
    let (env, _) = revealed(&tower(4, 10));
    let req = PlanRequest::template(1.0).between(Vec3::new(2.5, 2.5, 2.5), Vec3::new(13.5, 13.5, 2.5));
    c.bench_function("rrt_around_tower", |b| b.iter(|| plan(black_box(&env), &req).unwrap()));
}

criterion_group!(benches, gtsp_solve, sensing, clusters, rrt);
criterion_main!(benches);
