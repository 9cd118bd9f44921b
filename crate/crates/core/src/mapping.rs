//! Online occupancy maps.
//!
//! Every voxel starts [`VoxelState::Unknown`] and moves through a fixed
//! state machine as observations arrive:
//!
//! ```text
//! Unknown ──► Free ──► Obstacle
//!    │          │
//!    │          └────► InfraUninspected ──► InfraInspected
//!    ├────────────────► Obstacle
//!    └────────────────► InfraUninspected
//! ```
//!
//! Obstacle and InfraInspected are absorbing. The planner keeps two grids
//! of this type: the environment map (all evidence) and the
//! infrastructure-only map (segmented infrastructure returns only).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{GridSpec, Vec3, VoxelIndex};
use crate::world::{GroundTruthLabel, LabeledPointSet, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoxelState {
    Unknown,
    Free,
    Obstacle,
    InfraUninspected,
    InfraInspected,
}

impl VoxelState {
    const ALL: [VoxelState; 5] = [
        VoxelState::Unknown,
        VoxelState::Free,
        VoxelState::Obstacle,
        VoxelState::InfraUninspected,
        VoxelState::InfraInspected,
    ];

    fn slot(self) -> usize {
        self as usize
    }

    pub fn is_occupied(self) -> bool {
        matches!(
            self,
            VoxelState::Obstacle | VoxelState::InfraUninspected | VoxelState::InfraInspected
        )
    }

    pub fn is_infrastructure(self) -> bool {
        matches!(self, VoxelState::InfraUninspected | VoxelState::InfraInspected)
    }

    pub fn code(self) -> char {
        match self {
            VoxelState::Unknown => 'U',
            VoxelState::Free => 'F',
            VoxelState::Obstacle => 'O',
            VoxelState::InfraUninspected => 'N',
            VoxelState::InfraInspected => 'I',
        }
    }

    pub fn from_code(c: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| c.len() == 1 && c.starts_with(s.code()))
    }

    /// Whether the state machine permits `self → to`.
    pub fn can_become(self, to: VoxelState) -> bool {
        use VoxelState::*;
        matches!(
            (self, to),
            (Unknown, Free | Obstacle | InfraUninspected)
                | (Free, Obstacle | InfraUninspected)
                | (InfraUninspected, InfraInspected)
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("voxel {0} is outside the grid")]
    OutOfBounds(VoxelIndex),
    #[error("grid dump line {line}: {msg}")]
    Dump { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub unknown: usize,
    pub free: usize,
    pub obstacle: usize,
    pub infra_uninspected: usize,
    pub infra_inspected: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.unknown + self.free + self.obstacle + self.infra_uninspected + self.infra_inspected
    }

    fn from_counts(c: &[usize; 5]) -> Self {
        Self {
            unknown: c[0],
            free: c[1],
            obstacle: c[2],
            infra_uninspected: c[3],
            infra_inspected: c[4],
        }
    }
}

/// Cells that changed state during one [`VoxelGrid::integrate`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateSummary {
    pub newly_free: usize,
    pub newly_obstacle: usize,
    pub newly_infra: usize,
}

impl UpdateSummary {
    pub fn is_empty(&self) -> bool {
        self.newly_free + self.newly_obstacle + self.newly_infra == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    spec: GridSpec,
    states: Vec<VoxelState>,
    counts: [usize; 5],
}

impl VoxelGrid {
    pub fn new(spec: GridSpec) -> Self {
        let mut counts = [0; 5];
        counts[VoxelState::Unknown.slot()] = spec.len();
        Self {
            states: vec![VoxelState::Unknown; spec.len()],
            spec,
            counts,
        }
    }

    /// A grid with every cell of `scene` already observed. Used by the
    /// full-knowledge inspectability oracle.
    pub fn revealed(scene: &Scene) -> Self {
        let mut g = Self::new(*scene.spec());
        for n in 0..g.states.len() {
            let v = g.spec.from_linear(n);
            let s = match scene.label(v) {
                None => VoxelState::Free,
                Some(GroundTruthLabel::Obstacle) => VoxelState::Obstacle,
                Some(GroundTruthLabel::Infrastructure) => VoxelState::InfraUninspected,
            };
            g.transition(n, s);
        }
        g
    }

    /// Infrastructure-only projection of `env`: infrastructure states are
    /// kept, everything else is Unknown.
    pub fn infrastructure_view(env: &VoxelGrid) -> Self {
        let mut g = Self::new(env.spec);
        for (n, s) in env.states.iter().enumerate() {
            if s.is_infrastructure() {
                g.transition(n, VoxelState::InfraUninspected);
                if *s == VoxelState::InfraInspected {
                    g.transition(n, VoxelState::InfraInspected);
                }
            }
        }
        g
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn state(&self, v: VoxelIndex) -> Option<VoxelState> {
        self.spec.linear(v).map(|n| self.states[n])
    }

    /// State at a world point, `None` outside the grid.
    pub fn state_at(&self, p: Vec3) -> Option<VoxelState> {
        self.spec.voxel_of(p).and_then(|v| self.state(v))
    }

    pub fn is_free(&self, v: VoxelIndex) -> bool {
        self.state(v) == Some(VoxelState::Free)
    }

    /// Voxels currently in `state`, in storage order.
    pub fn voxels_in(&self, state: VoxelState) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter(move |(_, s)| **s == state)
            .map(|(n, _)| self.spec.from_linear(n))
    }

    pub fn count(&self, state: VoxelState) -> usize {
        self.counts[state.slot()]
    }

    pub fn census(&self) -> Census {
        Census::from_counts(&self.counts)
    }

    /// Census by full rescan; must always equal [`census`](Self::census).
    pub fn rescan(&self) -> Census {
        let mut c = [0usize; 5];
        for s in &self.states {
            c[s.slot()] += 1;
        }
        Census::from_counts(&c)
    }

    fn transition(&mut self, n: usize, to: VoxelState) -> bool {
        let from = self.states[n];
        if !from.can_become(to) {
            return false;
        }
        self.counts[from.slot()] -= 1;
        self.counts[to.slot()] += 1;
        self.states[n] = to;
        true
    }

    /// Folds one observation into the map. Free evidence never overrides
    /// an occupied cell; infrastructure already inspected stays inspected.
    pub fn integrate(&mut self, obs: &LabeledPointSet) -> Result<UpdateSummary, MapError> {
        // validate first so a bad observation leaves the grid untouched
        for r in &obs.rays {
            for &v in r.traversed.iter().chain(r.hit.iter().map(|h| &h.voxel)) {
                if !self.spec.contains(v) {
                    return Err(MapError::OutOfBounds(v));
                }
            }
        }
        let mut sum = UpdateSummary::default();
        for r in &obs.rays {
            for &v in &r.traversed {
                let n = self.spec.linear(v).expect("validated");
                if self.states[n] == VoxelState::Unknown && self.transition(n, VoxelState::Free) {
                    sum.newly_free += 1;
                }
            }
            if let Some(h) = &r.hit {
                let n = self.spec.linear(h.voxel).expect("validated");
                let to = match h.label {
                    GroundTruthLabel::Obstacle => VoxelState::Obstacle,
                    GroundTruthLabel::Infrastructure => VoxelState::InfraUninspected,
                };
                if !self.states[n].is_occupied() && self.transition(n, to) {
                    match to {
                        VoxelState::Obstacle => sum.newly_obstacle += 1,
                        _ => sum.newly_infra += 1,
                    }
                }
            }
        }
        Ok(sum)
    }

    /// Moves an uninspected infrastructure voxel to inspected; any other
    /// state is left alone. Returns the resulting state.
    pub fn mark_inspected(&mut self, v: VoxelIndex) -> Result<VoxelState, MapError> {
        let n = self.spec.linear(v).ok_or(MapError::OutOfBounds(v))?;
        if self.states[n] == VoxelState::InfraUninspected {
            self.transition(n, VoxelState::InfraInspected);
        }
        Ok(self.states[n])
    }

    /// Debug dump in the scene line format with state codes `U F O N I`.
    /// Unknown cells are implied and omitted.
    pub fn dump(&self) -> String {
        let mut out = format!("res {}\n", self.spec.resolution);
        let [nx, ny, nz] = self.spec.extents;
        out.push_str(&format!("dims {nx} {ny} {nz}\norigin {}\n", self.spec.origin));
        for (n, s) in self.states.iter().enumerate() {
            if *s != VoxelState::Unknown {
                out.push_str(&format!("{} {}\n", self.spec.from_linear(n), s.code()));
            }
        }
        out
    }

    /// Parses [`dump`](Self::dump) output. States are assigned directly, so a
    /// dump is trusted to describe a reachable map.
    pub fn parse_dump(text: &str) -> Result<Self, MapError> {
        let mut res = None;
        let mut dims = None;
        let mut origin = Vec3::ZERO;
        let mut cells = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let err = |msg: &str| MapError::Dump {
                line,
                msg: msg.to_string(),
            };
            let toks: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
            let nums = |t: &[&str]| -> Result<Vec<f64>, MapError> {
                t.iter()
                    .map(|x| x.parse::<f64>().map_err(|_| err("bad number")))
                    .collect()
            };
            match toks.first().copied() {
                None => {}
                Some("res") => res = nums(&toks[1..])?.first().copied(),
                Some("dims") => {
                    let d = nums(&toks[1..])?;
                    if d.len() != 3 {
                        return Err(err("dims needs 3 values"));
                    }
                    dims = Some([d[0] as usize, d[1] as usize, d[2] as usize]);
                }
                Some("origin") => {
                    let o = nums(&toks[1..])?;
                    if o.len() != 3 {
                        return Err(err("origin needs 3 values"));
                    }
                    origin = Vec3::new(o[0], o[1], o[2]);
                }
                Some(_) => {
                    if toks.len() != 4 {
                        return Err(err("expected `i j k STATE`"));
                    }
                    let ijk: Vec<i32> = toks[..3]
                        .iter()
                        .map(|x| x.parse().map_err(|_| err("bad index")))
                        .collect::<Result<_, _>>()?;
                    let s = VoxelState::from_code(toks[3]).ok_or_else(|| err("bad state code"))?;
                    cells.push((line, VoxelIndex::new(ijk[0], ijk[1], ijk[2]), s));
                }
            }
        }
        let spec = match (res, dims) {
            (Some(r), Some(d)) => GridSpec::new(r, origin, d),
            _ => None,
        }
        .ok_or(MapError::Dump {
            line: 0,
            msg: "missing or invalid header".into(),
        })?;
        let mut g = Self::new(spec);
        for (line, v, s) in cells {
            let n = spec.linear(v).ok_or(MapError::Dump {
                line,
                msg: format!("voxel {v} out of bounds"),
            })?;
            let from = g.states[n];
            g.counts[from.slot()] -= 1;
            g.counts[s.slot()] += 1;
            g.states[n] = s;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Hit, RayReturn};

    fn grid4() -> VoxelGrid {
        VoxelGrid::new(GridSpec::new(1.0, Vec3::ZERO, [4, 4, 4]).unwrap())
    }

    fn infra_hit(v: VoxelIndex, traversed: Vec<VoxelIndex>) -> LabeledPointSet {
        LabeledPointSet {
            rays: vec![RayReturn {
                traversed,
                hit: Some(Hit {
                    voxel: v,
                    point: Vec3::ZERO,
                    distance: 1.0,
                    label: GroundTruthLabel::Infrastructure,
                }),
            }],
        }
    }

    #[test]
    fn fresh_census() {
        let c = grid4().census();
        assert_eq!(c.unknown, 64);
        assert_eq!(c.total(), 64);
        assert_eq!(c.free + c.obstacle + c.infra_uninspected + c.infra_inspected, 0);
    }

    #[test]
    fn empty_observation_is_noop() {
        let mut g = grid4();
        let before = g.clone();
        assert!(g.integrate(&LabeledPointSet::default()).unwrap().is_empty());
        assert_eq!(g, before);
    }

    #[test]
    fn single_infra_hit_and_additive_census() {
        let mut g = grid4();
        let path: Vec<_> = (0..5).map(|n| g.spec().from_linear(n + 8)).collect();
        let s = g.integrate(&infra_hit(VoxelIndex::new(3, 3, 3), path)).unwrap();
        assert_eq!(s.newly_infra, 1);
        assert_eq!(s.newly_free, 5);
        let c = g.census();
        assert_eq!((c.infra_uninspected, c.free, c.unknown), (1, 5, 58));
    }

    #[test]
    fn inspected_voxel_is_not_downgraded() {
        let mut g = grid4();
        let v = VoxelIndex::new(1, 2, 3);
        g.integrate(&infra_hit(v, vec![])).unwrap();
        assert_eq!(g.mark_inspected(v).unwrap(), VoxelState::InfraInspected);
        let s = g.integrate(&infra_hit(v, vec![v])).unwrap();
        assert!(s.is_empty());
        assert_eq!(g.state(v), Some(VoxelState::InfraInspected));
    }

    #[test]
    fn mark_inspected_cases() {
        let mut g = grid4();
        let v = VoxelIndex::new(0, 0, 0);
        let f = VoxelIndex::new(1, 0, 0);
        g.integrate(&infra_hit(v, vec![f])).unwrap();
        assert_eq!(g.mark_inspected(f).unwrap(), VoxelState::Free);
        assert_eq!(g.mark_inspected(v).unwrap(), VoxelState::InfraInspected);
        assert_eq!(g.mark_inspected(v).unwrap(), VoxelState::InfraInspected);
        assert_eq!(
            g.mark_inspected(VoxelIndex::new(4, 0, 0)),
            Err(MapError::OutOfBounds(VoxelIndex::new(4, 0, 0)))
        );
    }

    #[test]
    fn out_of_bounds_observation_leaves_grid_untouched() {
        let mut g = grid4();
        let obs = infra_hit(VoxelIndex::new(0, 0, 9), vec![VoxelIndex::new(0, 0, 0)]);
        assert!(g.integrate(&obs).is_err());
        assert_eq!(g.census().unknown, 64);
    }

    #[test]
    fn free_becomes_occupied_on_late_discovery() {
        let mut g = grid4();
        let v = VoxelIndex::new(2, 2, 2);
        let mut obs = infra_hit(VoxelIndex::new(3, 3, 3), vec![v]);
        g.integrate(&obs).unwrap();
        assert!(g.is_free(v));
        obs.rays[0].hit.as_mut().unwrap().voxel = v;
        obs.rays[0].hit.as_mut().unwrap().label = GroundTruthLabel::Obstacle;
        obs.rays[0].traversed.clear();
        assert_eq!(g.integrate(&obs).unwrap().newly_obstacle, 1);
        assert_eq!(g.state(v), Some(VoxelState::Obstacle));
    }

    #[test]
    fn dump_roundtrip() {
        let mut g = grid4();
        g.integrate(&infra_hit(VoxelIndex::new(1, 1, 1), vec![VoxelIndex::new(0, 1, 1)]))
            .unwrap();
        g.mark_inspected(VoxelIndex::new(1, 1, 1)).unwrap();
        let back = VoxelGrid::parse_dump(&g.dump()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn transition_table() {
        use VoxelState::*;
        assert!(Unknown.can_become(Free));
        assert!(Free.can_become(InfraUninspected));
        assert!(!Free.can_become(Unknown));
        assert!(!Obstacle.can_become(Free));
        assert!(!InfraInspected.can_become(InfraUninspected));
        assert!(!InfraUninspected.can_become(Obstacle));
    }
}
