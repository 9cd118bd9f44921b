//! Inspection planning for partially known voxel worlds.

pub mod geom;
pub mod gtsp;
pub mod mapping;
pub mod metrics;
pub mod planner;
pub mod rrtstar;
pub mod viewgen;
pub mod world;

pub use geom::{GridSpec, Vec3, VoxelIndex};
pub use gtsp::{GtspInstance, GtspTour, SolveBudget};
pub use mapping::{Census, VoxelGrid, VoxelState};
pub use metrics::{RunReport, RunStatus, Sample};
pub use planner::{inspectability_oracle, run, PlannerConfig, PlannerError, PlannerState};
pub use rrtstar::{PlanRequest, PlannedPath};
pub use viewgen::{CameraSet, ClusterKey, ClusterSet, Granularity, ViewConstraint};
pub use world::{load_scene, Pose, Scene, SensorModel};
