//! Ground-truth scenes and a labeled range sensor.
//!
//! A [`Scene`] is the simulator's view of the world: a voxel lattice in
//! which every cell is free, infrastructure or obstacle. [`sense`] casts a
//! fan of rays from a pose and returns, per ray, the free cells it crossed
//! and the first occupied cell it struck together with that cell's label.
//! This stands in for a localized, semantically segmented depth camera.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, GridSpec, Vec3, VoxelIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroundTruthLabel {
    Infrastructure,
    Obstacle,
}

impl GroundTruthLabel {
    pub fn code(self) -> char {
        match self {
            GroundTruthLabel::Infrastructure => 'I',
            GroundTruthLabel::Obstacle => 'O',
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: voxel {index} lies outside extents {extents:?}")]
    OutOfBounds {
        line: usize,
        index: VoxelIndex,
        extents: [usize; 3],
    },
    #[error("line {line}: voxel {index} listed twice")]
    Duplicate { line: usize, index: VoxelIndex },
    #[error("missing `{0}` header")]
    MissingHeader(&'static str),
}

#[derive(Debug, Error, PartialEq)]
pub enum SenseError {
    #[error("pose {0} is outside the scene")]
    OutsideScene(Vec3),
    #[error("pose {0} lies inside an occupied voxel")]
    InsideOccupied(Vec3),
}

/// Immutable ground truth. Unlisted cells are free.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    spec: GridSpec,
    labels: Vec<Option<GroundTruthLabel>>,
}

impl Scene {
    /// Empty scene over `spec`.
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            labels: vec![None; spec.len()],
            spec,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn label(&self, v: VoxelIndex) -> Option<GroundTruthLabel> {
        self.spec.linear(v).and_then(|n| self.labels[n])
    }

    pub fn is_occupied(&self, v: VoxelIndex) -> bool {
        self.label(v).is_some()
    }

    /// Sets a cell label; `None` clears it. Returns `false` when `v` is out of bounds.
    pub fn set(&mut self, v: VoxelIndex, label: Option<GroundTruthLabel>) -> bool {
        match self.spec.linear(v) {
            Some(n) => {
                self.labels[n] = label;
                true
            }
            None => false,
        }
    }

    /// Listed (occupied) cells in storage order.
    pub fn cells(&self) -> impl Iterator<Item = (VoxelIndex, GroundTruthLabel)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(n, l)| l.map(|l| (self.spec.from_linear(n), l)))
    }

    pub fn count(&self, label: GroundTruthLabel) -> usize {
        self.labels.iter().filter(|l| **l == Some(label)).count()
    }

    /// Serializes to the line-oriented scene format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("res {}\n", self.spec.resolution));
        let [nx, ny, nz] = self.spec.extents;
        out.push_str(&format!("dims {nx} {ny} {nz}\n"));
        if self.spec.origin != Vec3::ZERO {
            out.push_str(&format!("origin {}\n", self.spec.origin));
        }
        for (v, l) in self.cells() {
            out.push_str(&format!("{v} {}\n", l.code()));
        }
        out
    }
}

impl FromStr for Scene {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        load_scene(s)
    }
}

/// Parses the scene text format: `res`, `dims` and optional `origin`
/// headers, then one `i j k I|O` cell per line. Statements may also be
/// separated by `;` and `#` starts a comment.
pub fn load_scene(source: &str) -> Result<Scene, SceneError> {
    let mut res: Option<f64> = None;
    let mut dims: Option<[usize; 3]> = None;
    let mut origin = Vec3::ZERO;
    let mut cells: Vec<(usize, VoxelIndex, GroundTruthLabel)> = Vec::new();

    for (ln, raw) in source.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("");
        for stmt in body.split(';') {
            let toks: Vec<&str> = stmt.split_whitespace().collect();
            let Some(&head) = toks.first() else {
                continue;
            };
            let perr = |msg: String| SceneError::Parse { line, msg };
            match head {
                "res" => {
                    let [v] = parse_n::<f64, 1>(&toks[1..]).map_err(perr)?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(perr(format!("resolution must be positive, got {v}")));
                    }
                    res = Some(v);
                }
                "dims" => {
                    let d = parse_n::<usize, 3>(&toks[1..]).map_err(perr)?;
                    if d.contains(&0) {
                        return Err(perr("dims must all be >= 1".into()));
                    }
                    dims = Some(d);
                }
                "origin" => {
                    let [x, y, z] = parse_n::<f64, 3>(&toks[1..]).map_err(perr)?;
                    origin = Vec3::new(x, y, z);
                }
                _ => {
                    if toks.len() != 4 {
                        return Err(perr(format!("expected `i j k I|O`, got `{}`", stmt.trim())));
                    }
                    let [i, j, k] = parse_n::<i32, 3>(&toks[..3]).map_err(perr)?;
                    let label = match toks[3] {
                        "I" => GroundTruthLabel::Infrastructure,
                        "O" => GroundTruthLabel::Obstacle,
                        other => return Err(perr(format!("unknown label `{other}`"))),
                    };
                    cells.push((line, VoxelIndex::new(i, j, k), label));
                }
            }
        }
    }

    let res = res.ok_or(SceneError::MissingHeader("res"))?;
    let dims = dims.ok_or(SceneError::MissingHeader("dims"))?;
    let spec = GridSpec::new(res, origin, dims).ok_or(SceneError::Parse {
        line: 0,
        msg: "invalid grid header".into(),
    })?;
    let mut scene = Scene::empty(spec);
    let mut seen = HashSet::new();
    for (line, v, label) in cells {
        if !spec.contains(v) {
            return Err(SceneError::OutOfBounds {
                line,
                index: v,
                extents: dims,
            });
        }
        if !seen.insert(v) {
            return Err(SceneError::Duplicate { line, index: v });
        }
        scene.set(v, Some(label));
    }
    Ok(scene)
}

fn parse_n<T: FromStr, const N: usize>(toks: &[&str]) -> Result<[T; N], String>
where
    T::Err: fmt::Display,
{
    if toks.len() != N {
        return Err(format!("expected {N} values, got {}", toks.len()));
    }
    let v: Vec<T> = toks
        .iter()
        .map(|t| t.parse::<T>().map_err(|e| format!("bad value `{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "arity".to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    yaw: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub horizontal_fov: f64,
    pub vertical_fov: f64,
    pub max_range: f64,
    pub rays_h: usize,
    pub rays_v: usize,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            horizontal_fov: 90f64.to_radians(),
            vertical_fov: 90f64.to_radians(),
            max_range: 20.0,
            rays_h: 64,
            rays_v: 64,
        }
    }
}

impl SensorModel {
    pub fn is_valid(&self) -> bool {
        let tau = std::f64::consts::TAU;
        self.horizontal_fov > 0.0
            && self.horizontal_fov <= tau
            && self.vertical_fov > 0.0
            && self.vertical_fov <= tau
            && self.max_range > 0.0
            && self.rays_h >= 2
            && self.rays_v >= 2
    }

    /// Unit ray directions for a sensor at `yaw`, with the vertical fan
    /// centered on `pitch` (0 = horizontal, +π/2 = straight up).
    pub fn directions(&self, yaw: f64, pitch: f64) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.rays_h * self.rays_v);
        let fan = |fov: f64, n: usize, a: usize| -fov / 2.0 + fov * a as f64 / (n - 1) as f64;
        for b in 0..self.rays_v {
            let el = pitch + fan(self.vertical_fov, self.rays_v, b);
            for a in 0..self.rays_h {
                let az = yaw + fan(self.horizontal_fov, self.rays_h, a);
                out.push(Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub voxel: VoxelIndex,
    /// Entry point on the struck voxel's boundary.
    pub point: Vec3,
    pub distance: f64,
    pub label: GroundTruthLabel,
}

/// One ray's worth of observation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RayReturn {
    /// Free cells crossed, starting with the sensor's own cell.
    pub traversed: Vec<VoxelIndex>,
    pub hit: Option<Hit>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledPointSet {
    pub rays: Vec<RayReturn>,
}

impl LabeledPointSet {
    pub fn hits(&self) -> impl Iterator<Item = &Hit> {
        self.rays.iter().filter_map(|r| r.hit.as_ref())
    }

    /// Segmentation stand-in: keeps only infrastructure returns and drops
    /// free-space evidence, which is what the infrastructure-only map consumes.
    pub fn infrastructure_only(&self) -> LabeledPointSet {
        LabeledPointSet {
            rays: self
                .rays
                .iter()
                .filter_map(|r| match r.hit {
                    Some(h) if h.label == GroundTruthLabel::Infrastructure => Some(RayReturn {
                        traversed: Vec::new(),
                        hit: Some(h),
                    }),
                    _ => None,
                })
                .collect(),
        }
    }
}

/// Casts the sensor fan horizontally around the pose's yaw.
pub fn sense(scene: &Scene, pose: &Pose, model: &SensorModel) -> Result<LabeledPointSet, SenseError> {
    sense_pitched(scene, pose, 0.0, model)
}

/// As [`sense`], with the vertical fan centered on `pitch` radians. Used for
/// upward and downward mounted cameras.
pub fn sense_pitched(
    scene: &Scene,
    pose: &Pose,
    pitch: f64,
    model: &SensorModel,
) -> Result<LabeledPointSet, SenseError> {
    let spec = scene.spec();
    let here = spec
        .voxel_of(pose.position)
        .ok_or(SenseError::OutsideScene(pose.position))?;
    if scene.is_occupied(here) {
        return Err(SenseError::InsideOccupied(pose.position));
    }
    let rays = model
        .directions(pose.yaw(), pitch)
        .into_iter()
        .map(|dir| cast(scene, pose.position, dir, model.max_range))
        .collect();
    Ok(LabeledPointSet { rays })
}

fn cast(scene: &Scene, from: Vec3, dir: Vec3, range: f64) -> RayReturn {
    let to = from + dir * range;
    let mut ret = RayReturn::default();
    scene.spec().walk(from, to, |v, t| match scene.label(v) {
        Some(label) => {
            ret.hit = Some(Hit {
                voxel: v,
                point: from.lerp(to, t),
                distance: t * range,
                label,
            });
            false
        }
        None => {
            ret.traversed.push(v);
            true
        }
    });
    ret
}
