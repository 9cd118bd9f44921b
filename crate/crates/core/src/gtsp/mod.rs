//! Generalized traveling salesman instances over candidate viewpoints.
//!
//! Vertices are partitioned into clusters; a tour picks exactly one vertex
//! per cluster and visits them in a cycle. Edge costs default to the
//! Euclidean distance between vertex positions and can be overridden pair
//! by pair, which is how path-length corrections enter the instance.

mod dump;
mod exact;
mod solver;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::viewgen::ClusterSet;

pub use dump::{parse_dump, write_dump};
pub use exact::{solve_exact, EXACT_GUARD};
pub use solver::{solve, solve_with_stats, SolveBudget, SolveStats};

#[derive(Debug, Error, PartialEq)]
pub enum GtspError {
    #[error("instance has no clusters")]
    EmptyInstance,
    #[error("cluster {0} has no vertices")]
    EmptyCluster(usize),
    #[error("vertex {0} does not exist")]
    MissingVertex(usize),
    #[error("edge cost must be nonnegative and finite, got {0}")]
    InvalidCost(f64),
    #[error("cannot set the cost of a self edge on vertex {0}")]
    SelfEdge(usize),
    #[error("exhaustive search needs {work:.3e} evaluations, above the {limit:.0e} guard")]
    TooLarge { work: f64, limit: f64 },
    #[error("invalid tour: {0}")]
    InvalidTour(String),
    #[error("instance dump line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub position: Vec3,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GtspInstance {
    vertices: Vec<Vertex>,
    clusters: Vec<Vec<usize>>,
    overrides: HashMap<(usize, usize), f64>,
    overridden: Vec<bool>,
}

impl GtspInstance {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a cluster with one vertex per position; returns its index.
    pub fn push_cluster<I: IntoIterator<Item = Vec3>>(&mut self, positions: I) -> usize {
        let c = self.clusters.len();
        let mut ids = Vec::new();
        for p in positions {
            ids.push(self.vertices.len());
            self.vertices.push(Vertex {
                position: p,
                cluster: c,
            });
            self.overridden.push(false);
        }
        self.clusters.push(ids);
        c
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn vertex(&self, id: usize) -> Option<&Vertex> {
        self.vertices.get(id)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn euclidean(&self, a: usize, b: usize) -> f64 {
        self.vertices[a].position.distance(self.vertices[b].position)
    }

    /// Edge cost; symmetric and zero on the diagonal.
    pub fn cost(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        if self.overridden[a] && self.overridden[b] {
            if let Some(&c) = self.overrides.get(&(a.min(b), a.max(b))) {
                return c;
            }
        }
        self.euclidean(a, b)
    }

    pub fn is_overridden(&self, a: usize, b: usize) -> bool {
        self.overrides.contains_key(&(a.min(b), a.max(b)))
    }

    pub fn override_count(&self) -> usize {
        self.overrides.len()
    }

    /// Replaces the cost of edge `{a, b}` in both directions.
    pub fn update_cost(&mut self, a: usize, b: usize, cost: f64) -> Result<(), GtspError> {
        for id in [a, b] {
            if id >= self.vertices.len() {
                return Err(GtspError::MissingVertex(id));
            }
        }
        if a == b {
            return Err(GtspError::SelfEdge(a));
        }
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(GtspError::InvalidCost(cost));
        }
        self.overrides.insert((a.min(b), a.max(b)), cost);
        self.overridden[a] = true;
        self.overridden[b] = true;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), GtspError> {
        if self.clusters.is_empty() {
            return Err(GtspError::EmptyInstance);
        }
        match self.clusters.iter().position(Vec::is_empty) {
            Some(c) => Err(GtspError::EmptyCluster(c)),
            None => Ok(()),
        }
    }

    /// Cost of the closed cycle through `order`.
    pub fn cycle_cost(&self, order: &[usize]) -> f64 {
        let n = order.len();
        (0..n).map(|i| self.cost(order[i], order[(i + 1) % n])).sum()
    }

    /// Checks that `order` visits each cluster exactly once and returns its cost.
    pub fn check_tour(&self, order: &[usize]) -> Result<f64, GtspError> {
        let mut seen = vec![false; self.clusters.len()];
        for &v in order {
            let c = self.vertices.get(v).ok_or(GtspError::MissingVertex(v))?.cluster;
            if std::mem::replace(&mut seen[c], true) {
                return Err(GtspError::InvalidTour(format!("cluster {c} visited twice")));
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(GtspError::InvalidTour(format!("cluster {c} not visited")));
        }
        Ok(self.cycle_cost(order))
    }
}

/// One vertex per viewpoint, clusters in key order, Euclidean costs.
/// Vertex ids follow the flattened member order of `clusters`.
pub fn build_instance(clusters: &ClusterSet) -> Result<GtspInstance, GtspError> {
    if clusters.clusters.is_empty() {
        return Err(GtspError::EmptyInstance);
    }
    let mut inst = GtspInstance::new();
    for c in &clusters.clusters {
        if c.members.is_empty() {
            return Err(GtspError::EmptyCluster(inst.cluster_count()));
        }
        inst.push_cluster(c.members.iter().map(|m| m.position));
    }
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtspTour {
    /// Vertex ids, one per cluster, read cyclically.
    pub order: Vec<usize>,
    pub cost: f64,
}

impl GtspTour {
    /// Rotates the cycle so that `order[0]` is `start`.
    pub fn rotate_to(&mut self, start: usize) -> bool {
        match self.order.iter().position(|&v| v == start) {
            Some(p) => {
                self.order.rotate_left(p);
                true
            }
            None => false,
        }
    }
}
