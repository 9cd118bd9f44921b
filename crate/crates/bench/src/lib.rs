//! Shared fixtures for benchmarks.

use gatsbi_core::geom::{GridSpec, VoxelIndex};
use gatsbi_core::mapping::VoxelGrid;
use gatsbi_core::world::{GroundTruthLabel, Scene};
use gatsbi_core::{GtspInstance, Vec3};

/// A square tower of infrastructure in the middle of an open grid.
pub fn tower(side: usize, height: usize) -> Scene {
    let n = side + 12;
    let spec = GridSpec::new(1.0, Vec3::ZERO, [n, n, height + 4]).unwrap();
    let mut s = Scene::empty(spec);
    for i in 6..6 + side {
        for j in 6..6 + side {
            for k in 0..height {
                s.set(
                    VoxelIndex::new(i as i32, j as i32, k as i32),
                    Some(GroundTruthLabel::Infrastructure),
                );
            }
        }
    }
    s
}

/// Fully revealed maps for `scene`: environment and infrastructure-only.
pub fn revealed(scene: &Scene) -> (VoxelGrid, VoxelGrid) {
    let env = VoxelGrid::revealed(scene);
    let infra = VoxelGrid::infrastructure_view(&env);
    (env, infra)
}

/// `clusters` clusters of `per` points scattered by a fixed low-discrepancy
/// pattern.
pub fn scattered_instance(clusters: usize, per: usize) -> GtspInstance {
    let mut inst = GtspInstance::new();
    let mut t = 0.0f64;
    for _ in 0..clusters {
        let pts: Vec<Vec3> = (0..per)
            .map(|_| {
                t += 1.0;
                Vec3::new(
                    (t * 0.618_034).fract() * 50.0,
                    (t * 0.414_214).fract() * 50.0,
                    (t * 0.732_051).fract() * 10.0,
                )
            })
            .collect();
        inst.push_cluster(pts);
    }
    inst
}
