//! Viewpoint generation.
//!
//! An uninspected infrastructure voxel is inspected by looking at one of
//! its exposed faces from a free voxel center that lies inside the viewing
//! cone anchored at the face center (axis along the outward normal), within
//! the allowed distance band, with an unobstructed line of sight, and with
//! a camera that can point that way. Each such (free voxel, face) pair is
//! a [`Viewpoint`]; viewpoints are grouped into clusters per voxel or per
//! face and become the vertex sets of the tour problem.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{GridSpec, Vec3, VoxelIndex};
use crate::mapping::{VoxelGrid, VoxelState};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::PosX,
        Direction::NegX,
        Direction::PosY,
        Direction::NegY,
        Direction::PosZ,
        Direction::NegZ,
    ];

    pub fn step(self) -> (i32, i32, i32) {
        match self {
            Direction::PosX => (1, 0, 0),
            Direction::NegX => (-1, 0, 0),
            Direction::PosY => (0, 1, 0),
            Direction::NegY => (0, -1, 0),
            Direction::PosZ => (0, 0, 1),
            Direction::NegZ => (0, 0, -1),
        }
    }

    pub fn unit(self) -> Vec3 {
        let (x, y, z) = self.step();
        Vec3::new(x as f64, y as f64, z as f64)
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::PosX => "+x",
            Direction::NegX => "-x",
            Direction::PosY => "+y",
            Direction::NegY => "-y",
            Direction::PosZ => "+z",
            Direction::NegZ => "-z",
        }
    }

    /// Camera that must be used to look at a face with this outward normal.
    pub fn camera(self) -> Camera {
        match self {
            Direction::PosZ => Camera::Down,
            Direction::NegZ => Camera::Up,
            _ => Camera::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Camera {
    Forward,
    Up,
    Down,
}

impl Camera {
    fn bit(self) -> u8 {
        match self {
            Camera::Forward => 1,
            Camera::Up => 2,
            Camera::Down => 4,
        }
    }

    /// Pitch of the camera's optical axis, radians.
    pub fn pitch(self) -> f64 {
        match self {
            Camera::Forward => 0.0,
            Camera::Up => std::f64::consts::FRAC_PI_2,
            Camera::Down => -std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Camera::Forward => "fwd",
            Camera::Up => "up",
            Camera::Down => "down",
        }
    }
}

/// Set of cameras mounted on the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CameraSet(u8);

impl CameraSet {
    pub const FORWARD: CameraSet = CameraSet(1);
    pub const ALL: CameraSet = CameraSet(7);

    pub fn of(cams: &[Camera]) -> Self {
        CameraSet(cams.iter().fold(0, |acc, c| acc | c.bit()))
    }

    pub fn contains(self, c: Camera) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Camera> {
        [Camera::Forward, Camera::Up, Camera::Down]
            .into_iter()
            .filter(move |c| self.contains(*c))
    }

    /// Parses `fwd[,up][,down]`.
    pub fn parse(s: &str) -> Option<Self> {
        let mut cams = Vec::new();
        for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            cams.push(match t {
                "fwd" | "forward" => Camera::Forward,
                "up" => Camera::Up,
                "down" => Camera::Down,
                _ => return None,
            });
        }
        let set = Self::of(&cams);
        (!set.is_empty()).then_some(set)
    }
}

impl fmt::Display for CameraSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(Camera::label).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    PerVoxel,
    PerFace,
}

impl Granularity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-voxel" => Some(Granularity::PerVoxel),
            "per-face" => Some(Granularity::PerFace),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Granularity::PerVoxel => "per-voxel",
            Granularity::PerFace => "per-face",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ViewError {
    #[error("apex angle must lie in [0, pi), got {0}")]
    Apex(f64),
    #[error("viewing distances must satisfy 0 < min < max, got [{0}, {1}]")]
    Distance(f64, f64),
    #[error("at least one camera is required")]
    NoCamera,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewConstraint {
    apex_angle: f64,
    min_dist: f64,
    max_dist: f64,
    cameras: CameraSet,
    granularity: Granularity,
}

impl Default for ViewConstraint {
    /// 20° apex, 2–5 m, forward camera, per-voxel clusters.
    fn default() -> Self {
        Self {
            apex_angle: 20f64.to_radians(),
            min_dist: 2.0,
            max_dist: 5.0,
            cameras: CameraSet::FORWARD,
            granularity: Granularity::PerVoxel,
        }
    }
}

impl ViewConstraint {
    pub fn new(
        apex_angle: f64,
        min_dist: f64,
        max_dist: f64,
        cameras: CameraSet,
        granularity: Granularity,
    ) -> Result<Self, ViewError> {
        if !(0.0..std::f64::consts::PI).contains(&apex_angle) {
            return Err(ViewError::Apex(apex_angle));
        }
        if !(min_dist > 0.0 && min_dist < max_dist && max_dist.is_finite()) {
            return Err(ViewError::Distance(min_dist, max_dist));
        }
        if cameras.is_empty() {
            return Err(ViewError::NoCamera);
        }
        Ok(Self {
            apex_angle,
            min_dist,
            max_dist,
            cameras,
            granularity,
        })
    }

    pub fn apex_angle(&self) -> f64 {
        self.apex_angle
    }
    pub fn min_dist(&self) -> f64 {
        self.min_dist
    }
    pub fn max_dist(&self) -> f64 {
        self.max_dist
    }
    pub fn cameras(&self) -> CameraSet {
        self.cameras
    }
    pub fn granularity(&self) -> Granularity {
        self.granularity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Face {
    voxel: VoxelIndex,
    normal: Direction,
    center: Vec3,
}

impl Face {
    pub fn new(spec: &GridSpec, voxel: VoxelIndex, normal: Direction) -> Self {
        Self {
            voxel,
            normal,
            center: spec.center(voxel) + normal.unit() * (spec.resolution / 2.0),
        }
    }

    pub fn voxel(&self) -> VoxelIndex {
        self.voxel
    }
    pub fn normal(&self) -> Direction {
        self.normal
    }
    pub fn center(&self) -> Vec3 {
        self.center
    }

    /// Cell on the outward side of the face.
    pub fn neighbor(&self) -> VoxelIndex {
        let (a, b, c) = self.normal.step();
        self.voxel.offset(a, b, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClusterKey {
    Voxel(VoxelIndex),
    Face(VoxelIndex, Direction),
}

impl ClusterKey {
    pub fn voxel(&self) -> VoxelIndex {
        match *self {
            ClusterKey::Voxel(v) | ClusterKey::Face(v, _) => v,
        }
    }
}

impl fmt::Display for ClusterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterKey::Voxel(v) => write!(f, "voxel {v}"),
            ClusterKey::Face(v, d) => write!(f, "face {v} {}", d.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub position: Vec3,
    pub voxel: VoxelIndex,
    pub target: Face,
    pub camera: Camera,
    /// Heading toward the target voxel's center.
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub key: ClusterKey,
    pub members: Vec<Viewpoint>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterSet {
    /// Sorted by key; every member list is nonempty.
    pub clusters: Vec<Cluster>,
    /// Keys without a single qualifying viewpoint, sorted.
    pub uninspectable: Vec<ClusterKey>,
    /// Number of `view_test` evaluations spent building the set.
    pub view_tests: usize,
}

impl ClusterSet {
    pub fn viewpoint_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    /// Keeps members satisfying `keep`; clusters left empty move to
    /// `uninspectable`.
    pub fn retain_members<F: FnMut(&Viewpoint) -> bool>(&mut self, mut keep: F) {
        let mut emptied = Vec::new();
        self.clusters.retain_mut(|c| {
            c.members.retain(&mut keep);
            if c.members.is_empty() {
                emptied.push(c.key);
                false
            } else {
                true
            }
        });
        self.uninspectable.extend(emptied);
        self.uninspectable.sort();
        self.uninspectable.dedup();
    }

    /// Drops keys entirely (neither inspectable nor uninspectable).
    pub fn remove_keys<F: Fn(&ClusterKey) -> bool>(&mut self, drop: F) {
        self.clusters.retain(|c| !drop(&c.key));
        self.uninspectable.retain(|k| !drop(k));
    }

    /// One line per viewpoint: key, position, target face, camera.
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        for c in &self.clusters {
            for m in &c.members {
                out.push_str(&format!(
                    "{} | {} | {} {} | {}\n",
                    c.key,
                    m.position,
                    m.target.voxel(),
                    m.target.normal().label(),
                    m.camera.label()
                ));
            }
        }
        for k in &self.uninspectable {
            out.push_str(&format!("{k} | uninspectable\n"));
        }
        out
    }
}

/// Faces of uninspected infrastructure voxels whose outward neighbour is
/// inside the grid and not occupied.
pub fn exposed_faces(env: &VoxelGrid, infra: &VoxelGrid) -> Vec<Face> {
    let spec = env.spec();
    let mut out = Vec::new();
    for v in infra.voxels_in(VoxelState::InfraUninspected) {
        for d in Direction::ALL {
            let f = Face::new(spec, v, d);
            if matches!(env.state(f.neighbor()), Some(VoxelState::Free | VoxelState::Unknown)) {
                out.push(f);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewResult {
    pub ok: bool,
    pub required_camera: Camera,
}

/// Full viewing test of `face` from point `p`: distance band, cone
/// half-angle about the face normal, line of sight through non-occupied
/// cells, and camera availability.
pub fn view_test(p: Vec3, face: &Face, c: &ViewConstraint, env: &VoxelGrid) -> ViewResult {
    let required_camera = face.normal().camera();
    let ok = geometric_ok(p, face, c) && c.cameras().contains(required_camera) && line_of_sight(p, face, env);
    ViewResult { ok, required_camera }
}

fn geometric_ok(p: Vec3, face: &Face, c: &ViewConstraint) -> bool {
    if !p.is_finite() {
        return false;
    }
    let rel = p - face.center();
    let d = rel.norm();
    if d < c.min_dist() - EPS || d > c.max_dist() + EPS {
        return false;
    }
    rel.angle_to(face.normal().unit()) <= c.apex_angle() / 2.0 + EPS
}

fn line_of_sight(p: Vec3, face: &Face, env: &VoxelGrid) -> bool {
    if env.spec().voxel_of(p).is_none() {
        return false;
    }
    let mut clear = true;
    env.spec().walk(p, face.center(), |v, _| {
        if v == face.voxel() {
            return true;
        }
        if env.state(v).is_some_and(VoxelState::is_occupied) {
            clear = false;
        }
        clear
    });
    clear
}

/// Heading from `from` toward `to` in the horizontal plane (0 when directly
/// above or below).
pub fn heading(from: Vec3, to: Vec3) -> f64 {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    if dx.abs() < EPS && dy.abs() < EPS {
        0.0
    } else {
        dy.atan2(dx)
    }
}

/// Builds viewpoint clusters for every uninspected infrastructure voxel.
/// Candidate free voxels are restricted to the bounding box of radius
/// `max_dist` around each face center before the full test runs.
pub fn generate_clusters(env: &VoxelGrid, infra: &VoxelGrid, c: &ViewConstraint) -> ClusterSet {
    let spec = *env.spec();
    let faces = exposed_faces(env, infra);
    let mut groups: BTreeMap<ClusterKey, Vec<Viewpoint>> = BTreeMap::new();
    let mut view_tests = 0usize;

    for v in infra.voxels_in(VoxelState::InfraUninspected) {
        if c.granularity() == Granularity::PerVoxel {
            groups.entry(ClusterKey::Voxel(v)).or_default();
        }
    }

    let reach = (c.max_dist() / spec.resolution).ceil() as i32 + 1;
    for face in &faces {
        let key = match c.granularity() {
            Granularity::PerVoxel => ClusterKey::Voxel(face.voxel()),
            Granularity::PerFace => ClusterKey::Face(face.voxel(), face.normal()),
        };
        let members = groups.entry(key).or_default();
        if !c.cameras().contains(face.normal().camera()) {
            continue;
        }
        let fc = face.neighbor();
        let target_center = spec.center(face.voxel());
        for dk in -reach..=reach {
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let cand = fc.offset(di, dj, dk);
                    if !env.is_free(cand) {
                        continue;
                    }
                    let p = spec.center(cand);
                    view_tests += 1;
                    let r = view_test(p, face, c, env);
                    if r.ok {
                        members.push(Viewpoint {
                            position: p,
                            voxel: cand,
                            target: *face,
                            camera: r.required_camera,
                            yaw: heading(p, target_center),
                        });
                    }
                }
            }
        }
    }

    // per-face mode: voxels with no exposed face at all are still reported
    if c.granularity() == Granularity::PerFace {
        for v in infra.voxels_in(VoxelState::InfraUninspected) {
            if !faces.iter().any(|f| f.voxel() == v) {
                groups.entry(ClusterKey::Voxel(v)).or_default();
            }
        }
    }

    let mut set = ClusterSet {
        view_tests,
        ..ClusterSet::default()
    };
    for (key, mut members) in groups {
        if members.is_empty() {
            set.uninspectable.push(key);
        } else {
            members.sort_by(|a, b| {
                (a.voxel, a.target.voxel(), a.target.normal()).cmp(&(b.voxel, b.target.voxel(), b.target.normal()))
            });
            set.clusters.push(Cluster { key, members });
        }
    }
    set
}
