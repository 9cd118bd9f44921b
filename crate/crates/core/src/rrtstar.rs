//! Point-to-point planning through confirmed-free space.
//!
//! Only `Free` voxels are flyable: unknown space blocks flight just like
//! occupied space. Paths come from RRT* followed by greedy shortcutting;
//! when the straight segment is already collision-free it is returned
//! directly, since shortcutting any RRT* solution would collapse to it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstar::primitives::GeomWithData;
use rstar::RTree;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::mapping::{VoxelGrid, VoxelState};

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("point {0} is outside the grid")]
    OutOfBounds(Vec3),
    #[error("endpoint {0} is not in a free voxel")]
    InvalidEndpoint(Vec3),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub start: Vec3,
    pub goal: Vec3,
    pub step: f64,
    pub rewire_radius: f64,
    pub max_iterations: usize,
    pub goal_bias: f64,
    pub seed: u64,
}

impl PlanRequest {
    /// Default tuning for a grid of the given resolution: one-voxel steps,
    /// three-voxel rewiring radius, 5000 iterations, 10% goal bias.
    pub fn template(resolution: f64) -> Self {
        Self {
            start: Vec3::ZERO,
            goal: Vec3::ZERO,
            step: resolution,
            rewire_radius: 3.0 * resolution,
            max_iterations: 5000,
            goal_bias: 0.1,
            seed: 0,
        }
    }

    pub fn between(mut self, start: Vec3, goal: Vec3) -> Self {
        self.start = start;
        self.goal = goal;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_valid(&self) -> bool {
        self.step > 0.0
            && self.rewire_radius >= self.step
            && self.max_iterations >= 1
            && (0.0..=1.0).contains(&self.goal_bias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub waypoints: Vec<Vec3>,
    pub length: f64,
}

impl PlannedPath {
    fn from_waypoints(waypoints: Vec<Vec3>) -> Self {
        let length = waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
        Self { waypoints, length }
    }

    /// `x,y,z` per line with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z\n");
        for w in &self.waypoints {
            out.push_str(&format!("{},{},{}\n", w.x, w.y, w.z));
        }
        out
    }
}

/// Details of one planning query.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub path: Option<PlannedPath>,
    /// Tree cost of the best goal connection before shortcutting.
    pub raw_cost: Option<f64>,
    pub iterations: usize,
}

/// True iff the segment touches no voxel that is not `Free`, counting
/// contact with a voxel's boundary as touching.
pub fn segment_free(env: &VoxelGrid, a: Vec3, b: Vec3) -> Result<bool, PlanError> {
    for p in [a, b] {
        if !env.spec().contains_point(p) {
            return Err(PlanError::OutOfBounds(p));
        }
    }
    Ok(segment_free_unchecked(env, a, b))
}

fn segment_free_unchecked(env: &VoxelGrid, a: Vec3, b: Vec3) -> bool {
    let spec = env.spec();
    let mut free = true;
    spec.walk(a, b, |v, _| {
        free = env.state(v) == Some(VoxelState::Free);
        // the walk puts boundary-grazing segments on one side only
        for (di, dj, dk) in NEIGHBORS_26 {
            let w = v.offset(di, dj, dk);
            if !free {
                break;
            }
            if env.state(w).is_some_and(|s| s != VoxelState::Free) {
                free = spec.segment_box_interval(w, a, b).is_none();
            }
        }
        free
    });
    free
}

const NEIGHBORS_26: [(i32, i32, i32); 26] = {
    let mut out = [(0, 0, 0); 26];
    let mut n = 0;
    let mut i = 0;
    while i < 27 {
        let (di, dj, dk) = (i / 9 - 1, (i / 3) % 3 - 1, i % 3 - 1);
        if !(di == 0 && dj == 0 && dk == 0) {
            out[n] = (di, dj, dk);
            n += 1;
        }
        i += 1;
    }
    out
};

pub fn plan(env: &VoxelGrid, req: &PlanRequest) -> Result<Option<PlannedPath>, PlanError> {
    plan_with_stats(env, req).map(|o| o.path)
}

/// Length of the planned path from `a` to `b`, `None` when no path was found.
pub fn path_length(env: &VoxelGrid, a: Vec3, b: Vec3, template: &PlanRequest) -> Result<Option<f64>, PlanError> {
    plan(env, &template.between(a, b)).map(|p| p.map(|p| p.length))
}

type Point = GeomWithData<[f64; 3], usize>;

struct Node {
    pos: Vec3,
    parent: Option<usize>,
    cost: f64,
    children: Vec<usize>,
}

pub fn plan_with_stats(env: &VoxelGrid, req: &PlanRequest) -> Result<PlanOutcome, PlanError> {
    for p in [req.start, req.goal] {
        match env.state_at(p) {
            None => return Err(PlanError::OutOfBounds(p)),
            Some(VoxelState::Free) => {}
            Some(_) => return Err(PlanError::InvalidEndpoint(p)),
        }
    }
    let done = |waypoints: Vec<Vec3>, iterations| {
        let path = PlannedPath::from_waypoints(waypoints);
        PlanOutcome {
            raw_cost: Some(path.length),
            path: Some(path),
            iterations,
        }
    };
    if req.start.distance(req.goal) < 1e-12 {
        return Ok(done(vec![req.start], 0));
    }
    if segment_free_unchecked(env, req.start, req.goal) {
        return Ok(done(vec![req.start, req.goal], 0));
    }

    let Some((lo, hi)) = free_bounds(env) else {
        return Ok(PlanOutcome {
            path: None,
            raw_cost: None,
            iterations: 0,
        });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut nodes = vec![Node {
        pos: req.start,
        parent: None,
        cost: 0.0,
        children: Vec::new(),
    }];
    let mut tree: RTree<Point> = RTree::new();
    tree.insert(Point::new(arr(req.start), 0));
    let mut goal_links: Vec<usize> = Vec::new();
    let r2 = req.rewire_radius * req.rewire_radius;

    for _ in 0..req.max_iterations {
        let sample = if rng.gen::<f64>() < req.goal_bias {
            req.goal
        } else {
            Vec3::new(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
                rng.gen_range(lo.z..hi.z),
            )
        };
        let nearest = tree.nearest_neighbor(&arr(sample)).expect("tree has the root").data;
        let from = nodes[nearest].pos;
        let d = from.distance(sample);
        if d < 1e-12 {
            continue;
        }
        let steered = if d <= req.step {
            sample
        } else {
            from + (sample - from) * (req.step / d)
        };
        // nodes live on voxel centers so one-voxel openings can be threaded
        let Some(cell) = env.spec().voxel_of(steered).filter(|&v| env.is_free(v)) else {
            continue;
        };
        let new = env.spec().center(cell);
        if new.distance(from) < 1e-9
            || tree
                .nearest_neighbor(&arr(new))
                .is_some_and(|p| nodes[p.data].pos.distance(new) < 1e-9)
            || !segment_free_unchecked(env, from, new)
        {
            continue;
        }

        let near: Vec<usize> = tree.locate_within_distance(arr(new), r2).map(|p| p.data).collect();
        let mut parent = nearest;
        let mut cost = nodes[nearest].cost + from.distance(new);
        for &n in &near {
            let c = nodes[n].cost + nodes[n].pos.distance(new);
            if c < cost - 1e-12 && segment_free_unchecked(env, nodes[n].pos, new) {
                parent = n;
                cost = c;
            }
        }
        let id = nodes.len();
        nodes.push(Node {
            pos: new,
            parent: Some(parent),
            cost,
            children: Vec::new(),
        });
        nodes[parent].children.push(id);
        tree.insert(Point::new(arr(new), id));

        for &n in &near {
            if n == parent {
                continue;
            }
            let c = cost + new.distance(nodes[n].pos);
            if c < nodes[n].cost - 1e-12 && segment_free_unchecked(env, new, nodes[n].pos) {
                reparent(&mut nodes, n, id, c);
            }
        }

        if new.distance(req.goal) <= req.step && segment_free_unchecked(env, new, req.goal) {
            goal_links.push(id);
        }
    }

    let best = goal_links
        .iter()
        .map(|&n| (n, nodes[n].cost + nodes[n].pos.distance(req.goal)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((last, raw_cost)) = best else {
        return Ok(PlanOutcome {
            path: None,
            raw_cost: None,
            iterations: req.max_iterations,
        });
    };
    let mut chain = vec![req.goal];
    let mut cur = Some(last);
    while let Some(n) = cur {
        if nodes[n].pos.distance(*chain.last().unwrap()) > 1e-12 {
            chain.push(nodes[n].pos);
        }
        cur = nodes[n].parent;
    }
    chain.reverse();
    let path = PlannedPath::from_waypoints(shortcut(env, &chain));
    Ok(PlanOutcome {
        path: Some(path),
        raw_cost: Some(raw_cost),
        iterations: req.max_iterations,
    })
}

fn arr(p: Vec3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn reparent(nodes: &mut [Node], n: usize, new_parent: usize, new_cost: f64) {
    if let Some(old) = nodes[n].parent {
        nodes[old].children.retain(|&c| c != n);
    }
    nodes[n].parent = Some(new_parent);
    nodes[new_parent].children.push(n);
    // the whole subtree gets cheaper by the same amount
    let delta = nodes[n].cost - new_cost;
    let mut stack = vec![n];
    while let Some(m) = stack.pop() {
        nodes[m].cost -= delta;
        stack.extend(nodes[m].children.iter().copied());
    }
}

/// Greedy shortcutting: from each kept waypoint jump to the farthest later
/// waypoint that is directly reachable.
fn shortcut(env: &VoxelGrid, chain: &[Vec3]) -> Vec<Vec3> {
    let mut out = vec![chain[0]];
    let mut i = 0;
    while i + 1 < chain.len() {
        let mut j = chain.len() - 1;
        while j > i + 1 && !segment_free_unchecked(env, chain[i], chain[j]) {
            j -= 1;
        }
        out.push(chain[j]);
        i = j;
    }
    out
}

/// World-space bounding box of all free voxels.
fn free_bounds(env: &VoxelGrid) -> Option<(Vec3, Vec3)> {
    let spec = env.spec();
    let mut lo = [i32::MAX; 3];
    let mut hi = [i32::MIN; 3];
    let mut any = false;
    for v in env.voxels_in(VoxelState::Free) {
        any = true;
        for a in 0..3 {
            lo[a] = lo[a].min(v.axis(a));
            hi[a] = hi[a].max(v.axis(a));
        }
    }
    any.then(|| {
        let r = spec.resolution;
        let o = spec.origin;
        (
            o + Vec3::new(lo[0] as f64, lo[1] as f64, lo[2] as f64) * r,
            o + Vec3::new((hi[0] + 1) as f64, (hi[1] + 1) as f64, (hi[2] + 1) as f64) * r - Vec3::new(1e-9, 1e-9, 1e-9),
        )
    })
}
