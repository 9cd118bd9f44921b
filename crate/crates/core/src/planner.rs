//! The receding-horizon inspection loop.
//!
//! Each iteration senses nothing new by itself; it plans over what is
//! known. It clusters viewpoints for every uninspected infrastructure voxel,
//! solves a clustered tour that starts from the vehicle, corrects the
//! first edge lazily with RRT* path lengths, then flies the tour, sensing
//! and marking inspections at each viewpoint. The loop ends when no
//! uninspected infrastructure remains or when what remains cannot be
//! reached.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Vec3, VoxelIndex};
use crate::gtsp::{self, GtspError, SolveBudget};
use crate::mapping::{Census, MapError, UpdateSummary, VoxelGrid, VoxelState};
use crate::metrics::{RunReport, RunStatus, Sample};
use crate::rrtstar::{self, PlanError, PlanRequest, PlannedPath};
use crate::viewgen::{
    generate_clusters, view_test, Camera, ClusterKey, ClusterSet, Direction, Granularity, ViewConstraint, Viewpoint,
};
use crate::world::{sense_pitched, GroundTruthLabel, Pose, Scene, SenseError, SensorModel};

/// Cost assigned to an edge whose endpoint could not be reached.
pub const UNREACHABLE_COST: f64 = 1e6;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no infrastructure visible from the start pose")]
    NoInfrastructureVisible,
    #[error(transparent)]
    Sense(#[from] SenseError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Gtsp(#[from] GtspError),
}

/// Deterministic stand-in for measured computation time, charged per unit
/// of work so that reports are reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeModel {
    pub view_test_s: f64,
    pub solver_iteration_s: f64,
    pub rrt_iteration_s: f64,
}

impl Default for ComputeModel {
    fn default() -> Self {
        Self {
            view_test_s: 2e-6,
            solver_iteration_s: 5e-4,
            rrt_iteration_s: 2e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub view: ViewConstraint,
    pub sensor: SensorModel,
    /// A first edge is accepted when its RRT* length is at most this
    /// multiple of its Euclidean length.
    pub dd_factor: f64,
    /// Viewpoints visited per iteration before replanning; `None` flies the
    /// whole tour.
    pub rpt: Option<usize>,
    pub max_lazy_replans: usize,
    pub solver: SolveBudget,
    pub rrt: PlanRequest,
    pub seed: u64,
    pub cruise_mps: f64,
    /// Spacing of the map-only sensor sweeps taken while flying between
    /// viewpoints; `None` senses at viewpoints only.
    pub en_route_spacing: Option<f64>,
    /// Consecutive iterations without progress before giving up.
    pub stall_limit: usize,
    pub max_iterations: usize,
    pub compute: ComputeModel,
}

impl PlannerConfig {
    pub fn new(resolution: f64) -> Self {
        Self {
            view: ViewConstraint::default(),
            sensor: SensorModel::default(),
            dd_factor: 1.25,
            rpt: None,
            max_lazy_replans: 25,
            solver: SolveBudget::default(),
            rrt: PlanRequest::template(resolution),
            seed: 0,
            cruise_mps: 1.0,
            en_route_spacing: Some(resolution),
            stall_limit: 3,
            max_iterations: 500,
            compute: ComputeModel::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::Config(m.to_string()));
        if !(self.dd_factor > 1.0 && self.dd_factor.is_finite()) {
            return bad("dd_factor must be > 1");
        }
        if self.max_lazy_replans < 1 {
            return bad("max_lazy_replans must be >= 1");
        }
        if self.rpt == Some(0) {
            return bad("rpt must be >= 1");
        }
        if !self.rrt.is_valid() {
            return bad("rrt parameters need step > 0, rewire_radius >= step, iterations >= 1, bias in [0, 1]");
        }
        if !self.sensor.is_valid() {
            return bad("sensor model is invalid");
        }
        if !(self.cruise_mps > 0.0 && self.cruise_mps.is_finite()) {
            return bad("cruise speed must be positive");
        }
        if self.solver.max_iterations == 0 || self.solver.stall_iterations == 0 {
            return bad("solver budget must be positive");
        }
        if self.en_route_spacing.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
            return bad("en-route spacing must be positive");
        }
        if self.stall_limit == 0 || self.max_iterations == 0 {
            return bad("stall_limit and max_iterations must be positive");
        }
        Ok(())
    }
}

/// Result of the lazy first-edge check in one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LazyRecord {
    pub replans: usize,
    pub exhausted: bool,
    pub first_edge_euclidean: f64,
    /// `None` when the planner found no path.
    pub first_edge_rrt: Option<f64>,
    pub within_dd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub clusters: usize,
    pub deferred: usize,
    pub instance_vertices: usize,
    pub tour_cost: Option<f64>,
    pub lazy: Option<LazyRecord>,
    pub viewpoints_visited: usize,
    pub skipped_invalid: usize,
    pub skipped_unreachable: usize,
    pub odometer: f64,
    pub planning_s: f64,
    pub inspected: usize,
    pub census: Census,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IterationOutcome {
    Continued,
    Finished,
    Stuck(Vec<ClusterKey>),
}

#[derive(Debug, Clone)]
pub struct PlannerState {
    pub pose: Pose,
    pub env: VoxelGrid,
    pub infra: VoxelGrid,
    pub odometer: f64,
    pub planning_clock: f64,
    pub iteration: usize,
    pub deferred: BTreeSet<ClusterKey>,
    pub trace: Vec<IterationRecord>,
    pub samples: Vec<Sample>,
    /// Every flown waypoint, starting at the start pose.
    pub flown: Vec<Vec3>,
    pub inspected_faces: BTreeSet<(VoxelIndex, Direction)>,
    stall: usize,
    idle: usize,
    rng: ChaCha8Rng,
}

impl PlannerState {
    pub fn inspected(&self) -> usize {
        self.infra.count(VoxelState::InfraInspected)
    }

    fn sample(&mut self) {
        let s = Sample {
            distance_m: self.odometer,
            planning_s: self.planning_clock,
            inspected: self.inspected(),
        };
        if self.samples.last() != Some(&s) {
            self.samples.push(s);
        }
    }

    /// Senses with every mounted camera and folds the result into both maps.
    fn observe(&mut self, scene: &Scene, config: &PlannerConfig) -> Result<UpdateSummary, PlannerError> {
        let mut total = UpdateSummary::default();
        for cam in config.view.cameras().iter() {
            let obs = sense_pitched(scene, &self.pose, cam.pitch(), &config.sensor)?;
            let s = self.env.integrate(&obs)?;
            self.infra.integrate(&obs.infrastructure_only())?;
            total.newly_free += s.newly_free;
            total.newly_obstacle += s.newly_obstacle;
            total.newly_infra += s.newly_infra;
        }
        Ok(total)
    }

    fn mark(&mut self, v: VoxelIndex) -> Result<(), PlannerError> {
        self.env.mark_inspected(v)?;
        self.infra.mark_inspected(v)?;
        Ok(())
    }
}

/// Senses once from `start` and prepares the planning state.
pub fn bootstrap(scene: &Scene, start: Pose, config: &PlannerConfig) -> Result<PlannerState, PlannerError> {
    config.validate()?;
    let spec = *scene.spec();
    let mut state = PlannerState {
        pose: start,
        env: VoxelGrid::new(spec),
        infra: VoxelGrid::new(spec),
        odometer: 0.0,
        planning_clock: 0.0,
        iteration: 0,
        deferred: BTreeSet::new(),
        trace: Vec::new(),
        samples: Vec::new(),
        flown: vec![start.position],
        inspected_faces: BTreeSet::new(),
        stall: 0,
        idle: 0,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };
    state.observe(scene, config)?;
    if state.infra.count(VoxelState::InfraUninspected) == 0 {
        return Err(PlannerError::NoInfrastructureVisible);
    }
    state.sample();
    Ok(state)
}

/// Free voxels reachable from `from` through face-adjacent free voxels.
fn reachable_free(env: &VoxelGrid, from: VoxelIndex) -> Vec<bool> {
    let spec = env.spec();
    let mut seen = vec![false; spec.len()];
    let Some(start) = spec.linear(from).filter(|_| env.is_free(from)) else {
        return seen;
    };
    seen[start] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for d in Direction::ALL {
            let (a, b, c) = d.step();
            let w = v.offset(a, b, c);
            if let Some(n) = spec.linear(w) {
                if !seen[n] && env.is_free(w) {
                    seen[n] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    seen
}

/// Clusters for the current maps, restricted to viewpoints the vehicle can
/// reach and, per face, to faces not yet inspected.
fn current_clusters(state: &mut PlannerState, config: &PlannerConfig) -> Result<ClusterSet, PlannerError> {
    let view = &config.view;
    let mut cs = generate_clusters(&state.env, &state.infra, view);
    state.planning_clock += cs.view_tests as f64 * config.compute.view_test_s;

    if view.granularity() == Granularity::PerFace {
        let done = &state.inspected_faces;
        cs.remove_keys(|k| matches!(k, ClusterKey::Face(v, d) if done.contains(&(*v, *d))));
        // voxels with an inspected face and nothing left to cluster are done
        let mut finished = Vec::new();
        for v in state.infra.voxels_in(VoxelState::InfraUninspected) {
            let touched = done.iter().any(|(w, _)| *w == v);
            let open = cs.clusters.iter().any(|c| c.key.voxel() == v);
            if touched && !open {
                finished.push(v);
            }
        }
        for v in &finished {
            state.mark(*v)?;
        }
        cs.remove_keys(|k| finished.contains(&k.voxel()));
    }

    let here = state.env.spec().voxel_of(state.pose.position);
    let reach = here.map(|h| reachable_free(&state.env, h)).unwrap_or_default();
    let spec = *state.env.spec();
    cs.retain_members(|vp| spec.linear(vp.voxel).is_some_and(|n| reach.get(n) == Some(&true)));
    Ok(cs)
}

fn key_done(state: &PlannerState, key: &ClusterKey) -> bool {
    match key {
        ClusterKey::Voxel(v) => state.infra.state(*v) != Some(VoxelState::InfraUninspected),
        ClusterKey::Face(v, d) => {
            state.inspected_faces.contains(&(*v, *d)) || state.infra.state(*v) != Some(VoxelState::InfraUninspected)
        }
    }
}

fn plan_leg(state: &mut PlannerState, config: &PlannerConfig, goal: Vec3) -> Result<Option<PlannedPath>, PlannerError> {
    let req = config.rrt.between(state.pose.position, goal).with_seed(state.rng.gen());
    let out = rrtstar::plan_with_stats(&state.env, &req)?;
    state.planning_clock += out.iterations as f64 * config.compute.rrt_iteration_s;
    Ok(out.path)
}

/// One planning iteration: cluster, solve, lazily correct the first edge,
/// then fly the tour.
pub fn iterate(
    state: &mut PlannerState,
    scene: &Scene,
    config: &PlannerConfig,
) -> Result<IterationOutcome, PlannerError> {
    state.iteration += 1;
    let cs = current_clusters(state, config)?;
    let deferred: BTreeSet<ClusterKey> = cs.uninspectable.iter().copied().collect();
    let shrank = deferred.len() < state.deferred.len();
    state.deferred = deferred;

    let mut record = IterationRecord {
        iteration: state.iteration,
        clusters: cs.clusters.len(),
        deferred: state.deferred.len(),
        instance_vertices: 0,
        tour_cost: None,
        lazy: None,
        viewpoints_visited: 0,
        skipped_invalid: 0,
        skipped_unreachable: 0,
        odometer: state.odometer,
        planning_s: state.planning_clock,
        inspected: state.inspected(),
        census: state.env.census(),
    };

    if cs.clusters.is_empty() {
        let outcome = if state.deferred.is_empty() {
            IterationOutcome::Finished
        } else {
            state.stall = if shrank { 0 } else { state.stall + 1 };
            if state.stall >= config.stall_limit {
                IterationOutcome::Stuck(state.deferred.iter().copied().collect())
            } else {
                IterationOutcome::Continued
            }
        };
        state.trace.push(record);
        return Ok(outcome);
    }
    state.stall = 0;

    // tour instance: every viewpoint plus the vehicle as its own cluster
    let viewpoints: Vec<(ClusterKey, Viewpoint)> = cs
        .clusters
        .iter()
        .flat_map(|c| c.members.iter().map(move |m| (c.key, *m)))
        .collect();
    let mut inst = gtsp::build_instance(&cs)?;
    let depot_cluster = inst.push_cluster([state.pose.position]);
    let depot = inst.clusters()[depot_cluster][0];
    record.instance_vertices = inst.vertex_count();

    let mut legs: HashMap<usize, Option<PlannedPath>> = HashMap::new();
    let mut replans = 0;
    let (tour, lazy) = loop {
        let (mut tour, stats) = gtsp::solve_with_stats(&inst, config.solver, state.rng.gen())?;
        state.planning_clock += stats.iterations.max(1) as f64 * config.compute.solver_iteration_s;
        tour.rotate_to(depot);
        let first = tour.order[1];
        let target = viewpoints[first].1.position;
        let euclid = state.pose.position.distance(target);
        if let Entry::Vacant(slot) = legs.entry(first) {
            slot.insert(plan_leg(state, config, target)?);
        }
        let rrt = legs[&first].as_ref().map(|p| p.length);
        let within = rrt.is_some_and(|l| l <= config.dd_factor * euclid + 1e-9);
        if within || replans >= config.max_lazy_replans {
            let lazy = LazyRecord {
                replans,
                exhausted: !within,
                first_edge_euclidean: euclid,
                first_edge_rrt: rrt,
                within_dd: within,
            };
            break (tour, lazy);
        }
        inst.update_cost(depot, first, rrt.unwrap_or(UNREACHABLE_COST))?;
        replans += 1;
    };
    record.tour_cost = Some(tour.cost);
    record.lazy = Some(lazy);

    // fly the tour from the vehicle, dropping the closing edge
    let budget = config.rpt.unwrap_or(usize::MAX);
    let mut inspected_this_round = 0;
    for (pos, &v) in tour.order.iter().enumerate().skip(1) {
        if record.viewpoints_visited >= budget {
            break;
        }
        let (key, vp) = viewpoints[v];
        if key_done(state, &key) {
            continue;
        }
        if !still_valid(state, config, &vp) {
            record.skipped_invalid += 1;
            continue;
        }
        let leg = match legs.remove(&v).filter(|_| pos == 1) {
            Some(leg) => leg,
            None => plan_leg(state, config, vp.position)?,
        };
        let Some(leg) = leg else {
            record.skipped_unreachable += 1;
            continue;
        };
        fly(state, scene, config, &leg)?;
        state.pose = Pose::new(vp.position, vp.yaw);
        state.observe(scene, config)?;
        record.viewpoints_visited += 1;
        if still_valid(state, config, &vp) {
            match key {
                ClusterKey::Voxel(voxel) => state.mark(voxel)?,
                ClusterKey::Face(voxel, dir) => {
                    state.inspected_faces.insert((voxel, dir));
                    let all_done = cs
                        .clusters
                        .iter()
                        .filter(|c| c.key.voxel() == voxel)
                        .all(|c| key_done(state, &c.key));
                    if all_done {
                        state.mark(voxel)?;
                    }
                }
            }
            inspected_this_round += 1;
        }
        state.sample();
    }

    record.odometer = state.odometer;
    record.planning_s = state.planning_clock;
    record.inspected = state.inspected();
    record.census = state.env.census();
    state.trace.push(record);
    state.sample();

    if inspected_this_round == 0 {
        state.idle += 1;
        if state.idle >= config.stall_limit {
            let mut left: Vec<ClusterKey> = cs
                .clusters
                .iter()
                .map(|c| c.key)
                .filter(|k| !key_done(state, k))
                .chain(state.deferred.iter().copied())
                .collect();
            left.sort();
            left.dedup();
            return Ok(IterationOutcome::Stuck(left));
        }
    } else {
        state.idle = 0;
    }
    Ok(IterationOutcome::Continued)
}

fn still_valid(state: &PlannerState, config: &PlannerConfig, vp: &Viewpoint) -> bool {
    state.env.is_free(vp.voxel)
        && state.infra.state(vp.target.voxel()) == Some(VoxelState::InfraUninspected)
        && view_test(vp.position, &vp.target, &config.view, &state.env).ok
}

/// Follows `leg`, sensing along the way if configured. En-route data only
/// updates the maps; inspections are credited at viewpoints.
fn fly(state: &mut PlannerState, scene: &Scene, config: &PlannerConfig, leg: &PlannedPath) -> Result<(), PlannerError> {
    for w in leg.waypoints.iter().skip(1) {
        let last = *state.flown.last().expect("flown starts with the start pose");
        let len = last.distance(*w);
        if let Some(spacing) = config.en_route_spacing.filter(|_| len > 0.0) {
            let yaw = crate::viewgen::heading(last, *w);
            let steps = (len / spacing).ceil() as usize;
            for s in 0..steps {
                let p = last.lerp(*w, s as f64 / steps as f64);
                state.pose = Pose::new(p, yaw);
                state.observe(scene, config)?;
            }
        }
        state.odometer += len;
        state.flown.push(*w);
    }
    Ok(())
}

/// Full-knowledge inspectability: the whole scene revealed to the maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCounts {
    pub object_voxels: usize,
    pub inspectable: usize,
    pub uninspectable: usize,
    pub inspectable_set: BTreeSet<VoxelIndex>,
}

pub fn inspectability_oracle(scene: &Scene, view: &ViewConstraint) -> OracleCounts {
    let env = VoxelGrid::revealed(scene);
    let infra = VoxelGrid::infrastructure_view(&env);
    let cs = generate_clusters(&env, &infra, view);
    let inspectable_set: BTreeSet<VoxelIndex> = cs.clusters.iter().map(|c| c.key.voxel()).collect();
    let object_voxels = scene.count(GroundTruthLabel::Infrastructure);
    OracleCounts {
        object_voxels,
        inspectable: inspectable_set.len(),
        uninspectable: object_voxels - inspectable_set.len(),
        inspectable_set,
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: RunReport,
    pub state: PlannerState,
}

/// Bootstraps and iterates until finished or stuck.
pub fn run(scene: &Scene, name: &str, start: Pose, config: &PlannerConfig) -> Result<RunResult, PlannerError> {
    let mut state = bootstrap(scene, start, config)?;
    let (status, uninspectable) = loop {
        if state.iteration >= config.max_iterations {
            let mut left: Vec<ClusterKey> = state
                .infra
                .voxels_in(VoxelState::InfraUninspected)
                .map(ClusterKey::Voxel)
                .collect();
            left.sort();
            break (RunStatus::Stuck, left);
        }
        match iterate(&mut state, scene, config)? {
            IterationOutcome::Continued => {}
            IterationOutcome::Finished => break (RunStatus::Finished, Vec::new()),
            IterationOutcome::Stuck(keys) => break (RunStatus::Stuck, keys),
        }
    };
    let oracle = inspectability_oracle(scene, &config.view);
    let report = RunReport {
        scene: name.to_string(),
        status,
        object_voxels: oracle.object_voxels,
        inspectable_voxels: oracle.inspectable,
        inspected: state.inspected(),
        distance_m: state.odometer,
        planning_s: state.planning_clock,
        cruise_mps: config.cruise_mps,
        iterations: state.iteration,
        samples: state.samples.clone(),
        uninspectable,
    };
    Ok(RunResult { report, state })
}

/// Camera used at a viewpoint, for callers that want to report it.
pub fn viewpoint_camera(vp: &Viewpoint) -> Camera {
    vp.camera
}
