//! Large-neighborhood search for the clustered tour.
//!
//! Construction is a cluster-level nearest neighbour. Each improvement
//! iteration removes a run of consecutive clusters, reinserts them one by
//! one at their cheapest (position, vertex), then polishes with vertex
//! reselection and 2-opt. Only strictly improving results are kept.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GtspError, GtspInstance, GtspTour};

const MAX_REMOVAL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveBudget {
    pub max_iterations: usize,
    /// Stop after this many consecutive non-improving iterations.
    pub stall_iterations: usize,
}

impl Default for SolveBudget {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            stall_iterations: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub construction_cost: f64,
    pub iterations: usize,
    pub improvements: usize,
}

pub fn solve(inst: &GtspInstance, budget: SolveBudget, seed: u64) -> Result<GtspTour, GtspError> {
    solve_with_stats(inst, budget, seed).map(|(t, _)| t)
}

pub fn solve_with_stats(
    inst: &GtspInstance,
    budget: SolveBudget,
    seed: u64,
) -> Result<(GtspTour, SolveStats), GtspError> {
    inst.validate()?;
    let search = Search::new(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut tour = search.construct();
    let mut stats = SolveStats {
        construction_cost: inst.cycle_cost(&tour),
        ..SolveStats::default()
    };
    search.polish(&mut tour);
    let mut cost = inst.cycle_cost(&tour);

    let n = tour.len();
    if n == 2 {
        // reselection moves one end at a time; two clusters are solved outright
        tour = search.best_pair();
        cost = inst.cycle_cost(&tour);
    }
    if n >= 3 {
        let mut stall = 0;
        while stats.iterations < budget.max_iterations && stall < budget.stall_iterations {
            stats.iterations += 1;
            let mut cand = tour.clone();
            let k = rng.gen_range(1..=MAX_REMOVAL.min(n - 1));
            let start = rng.gen_range(0..n);
            search.destroy_repair(&mut cand, start, k, &mut rng);
            search.polish(&mut cand);
            let c = inst.cycle_cost(&cand);
            if c < cost - 1e-12 * cost.abs().max(1.0) {
                tour = cand;
                cost = c;
                stats.improvements += 1;
                stall = 0;
            } else {
                stall += 1;
            }
        }
    }
    Ok((GtspTour { order: tour, cost }, stats))
}

struct Search<'a> {
    inst: &'a GtspInstance,
    /// Cluster members in a canonical order (by position, then id) so the
    /// search does not depend on how ids were assigned.
    members: Vec<Vec<usize>>,
}

impl<'a> Search<'a> {
    fn new(inst: &'a GtspInstance) -> Self {
        let members = inst
            .clusters()
            .iter()
            .map(|ids| {
                let mut m = ids.clone();
                m.sort_by(|&a, &b| {
                    let (pa, pb) = (inst.vertices()[a].position, inst.vertices()[b].position);
                    pa.x.total_cmp(&pb.x)
                        .then(pa.y.total_cmp(&pb.y))
                        .then(pa.z.total_cmp(&pb.z))
                        .then(a.cmp(&b))
                });
                m
            })
            .collect();
        Self { inst, members }
    }

    fn c(&self, a: usize, b: usize) -> f64 {
        self.inst.cost(a, b)
    }

    fn cluster_of(&self, v: usize) -> usize {
        self.inst.vertices()[v].cluster
    }

    fn construct(&self) -> Vec<usize> {
        let n = self.members.len();
        // start from cluster 0's vertex with the cheapest link to any other cluster
        let first = *self.members[0]
            .iter()
            .min_by(|&&a, &&b| {
                let la = self.cheapest_link(a);
                let lb = self.cheapest_link(b);
                la.total_cmp(&lb)
            })
            .expect("nonempty cluster");
        let mut visited = vec![false; n];
        visited[0] = true;
        let mut tour = vec![first];
        while tour.len() < n {
            let last = *tour.last().unwrap();
            let mut best: Option<(f64, usize)> = None;
            for (ci, ms) in self.members.iter().enumerate() {
                if visited[ci] {
                    continue;
                }
                for &v in ms {
                    let d = self.c(last, v);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, v));
                    }
                }
            }
            let (_, v) = best.expect("unvisited cluster remains");
            visited[self.cluster_of(v)] = true;
            tour.push(v);
        }
        tour
    }

    fn best_pair(&self) -> Vec<usize> {
        let mut best = (f64::INFINITY, 0, 0);
        for &a in &self.members[0] {
            for &b in &self.members[1] {
                let d = self.c(a, b) + self.c(b, a);
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        vec![best.1, best.2]
    }

    fn cheapest_link(&self, v: usize) -> f64 {
        let own = self.cluster_of(v);
        self.members
            .iter()
            .enumerate()
            .filter(|(ci, _)| *ci != own)
            .flat_map(|(_, ms)| ms.iter())
            .map(|&u| self.c(v, u))
            .fold(f64::INFINITY, f64::min)
    }

    fn destroy_repair(&self, tour: &mut Vec<usize>, start: usize, k: usize, rng: &mut ChaCha8Rng) {
        let n = tour.len();
        let mut removed = Vec::with_capacity(k);
        for step in 0..k {
            removed.push(tour[(start + step) % n]);
        }
        tour.retain(|v| !removed.contains(v));
        // random reinsertion order
        for i in (1..removed.len()).rev() {
            let j = rng.gen_range(0..=i);
            removed.swap(i, j);
        }
        for v in removed {
            self.insert_cheapest(tour, self.cluster_of(v));
        }
    }

    fn insert_cheapest(&self, tour: &mut Vec<usize>, cluster: usize) {
        let m = tour.len();
        let mut best: Option<(f64, usize, usize)> = None;
        for &u in &self.members[cluster] {
            for i in 0..m {
                let (a, b) = (tour[i], tour[(i + 1) % m]);
                let delta = self.c(a, u) + self.c(u, b) - self.c(a, b);
                if best.is_none_or(|(bd, _, _)| delta < bd) {
                    best = Some((delta, i + 1, u));
                }
            }
        }
        let (_, at, u) = best.expect("nonempty cluster and tour");
        tour.insert(at, u);
    }

    fn polish(&self, tour: &mut [usize]) {
        loop {
            let a = self.reselect(tour);
            let b = self.two_opt(tour);
            if !(a || b) && !self.best_members(tour) {
                break;
            }
        }
    }

    /// Optimal vertex choice for the current cluster order: a layered
    /// shortest path opened at the smallest cluster.
    fn best_members(&self, tour: &mut [usize]) -> bool {
        let n = tour.len();
        if n < 2 {
            return false;
        }
        let size = |v: usize| self.members[self.cluster_of(v)].len();
        let first = (0..n).min_by_key(|&i| (size(tour[i]), i)).expect("nonempty tour");
        let seq: Vec<usize> = (0..n).map(|i| self.cluster_of(tour[(first + i) % n])).collect();
        let current = self.inst.cycle_cost(tour);
        let mut best: Option<(f64, Vec<usize>)> = None;
        for &s in &self.members[seq[0]] {
            // back[l][m]: predecessor index in layer l - 1 of member m of layer l
            let mut dist = vec![0.0];
            let mut prev_members = vec![s];
            let mut back: Vec<Vec<usize>> = Vec::with_capacity(n);
            for &c in &seq[1..] {
                let ms = &self.members[c];
                let mut nd = Vec::with_capacity(ms.len());
                let mut nb = Vec::with_capacity(ms.len());
                for &v in ms {
                    let (bi, bd) = prev_members
                        .iter()
                        .zip(&dist)
                        .map(|(&u, &d)| d + self.c(u, v))
                        .enumerate()
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .expect("nonempty layer");
                    nd.push(bd);
                    nb.push(bi);
                }
                dist = nd;
                prev_members = ms.clone();
                back.push(nb);
            }
            let (mut at, total) = prev_members
                .iter()
                .zip(&dist)
                .map(|(&u, &d)| d + self.c(u, s))
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty layer");
            if best.as_ref().is_none_or(|(bd, _)| total < *bd) {
                let mut pick = vec![s; n];
                for l in (1..n).rev() {
                    pick[l] = self.members[seq[l]][at];
                    at = back[l - 1][at];
                }
                best = Some((total, pick));
            }
        }
        let (cost, pick) = best.expect("nonempty cluster");
        if cost < current - 1e-12 * current.abs().max(1.0) {
            for (i, v) in pick.into_iter().enumerate() {
                tour[(first + i) % n] = v;
            }
            true
        } else {
            false
        }
    }

    /// Replaces each vertex with the best member of its cluster given its
    /// current neighbours, sweeping until nothing changes.
    fn reselect(&self, tour: &mut [usize]) -> bool {
        let n = tour.len();
        if n < 2 {
            return false;
        }
        let mut changed_any = false;
        loop {
            let mut changed = false;
            for i in 0..n {
                let (p, q) = (tour[(i + n - 1) % n], tour[(i + 1) % n]);
                let cur = tour[i];
                let cur_cost = self.c(p, cur) + self.c(cur, q);
                let mut best = (cur_cost, cur);
                for &u in &self.members[self.cluster_of(cur)] {
                    let d = self.c(p, u) + self.c(u, q);
                    if d < best.0 - 1e-12 {
                        best = (d, u);
                    }
                }
                if best.1 != cur {
                    tour[i] = best.1;
                    changed = true;
                }
            }
            if !changed {
                return changed_any;
            }
            changed_any = true;
        }
    }

    fn two_opt(&self, tour: &mut [usize]) -> bool {
        let n = tour.len();
        if n < 4 {
            return false;
        }
        let mut improved_any = false;
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..n - 1 {
                for j in i + 1..n {
                    if i == 0 && j == n - 1 {
                        continue;
                    }
                    let a = tour[(i + n - 1) % n];
                    let b = tour[i];
                    let c = tour[j];
                    let d = tour[(j + 1) % n];
                    let delta = self.c(a, c) + self.c(b, d) - self.c(a, b) - self.c(c, d);
                    if delta < -1e-12 {
                        tour[i..=j].reverse();
                        improved = true;
                        improved_any = true;
                    }
                }
            }
        }
        improved_any
    }
}
