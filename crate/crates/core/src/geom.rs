//! Vectors, voxel indices and the exact voxel walk shared by sensing,
//! line-of-sight and collision checks.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn axis(self, a: usize) -> f64 {
        match a {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }

    /// Unsigned angle between two vectors in radians; numerically stable near 0 and π.
    pub fn angle_to(self, o: Vec3) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.x, self.y, self.z)
    }
}

/// Integer voxel coordinates. Signed so that neighbour arithmetic can step
/// outside the grid before a bounds check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl VoxelIndex {
    pub const fn new(i: i32, j: i32, k: i32) -> Self {
        Self { i, j, k }
    }

    pub fn offset(self, di: i32, dj: i32, dk: i32) -> Self {
        Self::new(self.i + di, self.j + dj, self.k + dk)
    }

    pub fn axis(self, a: usize) -> i32 {
        match a {
            0 => self.i,
            1 => self.j,
            _ => self.k,
        }
    }

    fn axis_mut(&mut self, a: usize) -> &mut i32 {
        match a {
            0 => &mut self.i,
            1 => &mut self.j,
            _ => &mut self.k,
        }
    }

    /// Chebyshev distance; 1 means the two voxels are 26-neighbours.
    pub fn chebyshev(self, o: VoxelIndex) -> i32 {
        (self.i - o.i).abs().max((self.j - o.j).abs()).max((self.k - o.k).abs())
    }
}

impl fmt::Display for VoxelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.i, self.j, self.k)
    }
}

/// Placement of a dense voxel lattice in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: f64,
    pub origin: Vec3,
    pub extents: [usize; 3],
}

impl GridSpec {
    pub fn new(resolution: f64, origin: Vec3, extents: [usize; 3]) -> Option<Self> {
        let ok = resolution.is_finite()
            && resolution > 0.0
            && origin.is_finite()
            && extents.iter().all(|&e| e >= 1 && e <= i32::MAX as usize);
        ok.then_some(Self {
            resolution,
            origin,
            extents,
        })
    }

    pub fn len(&self) -> usize {
        self.extents[0] * self.extents[1] * self.extents[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: VoxelIndex) -> bool {
        (0..3).all(|a| v.axis(a) >= 0 && (v.axis(a) as usize) < self.extents[a])
    }

    pub fn linear(&self, v: VoxelIndex) -> Option<usize> {
        self.contains(v)
            .then(|| (v.k as usize * self.extents[1] + v.j as usize) * self.extents[0] + v.i as usize)
    }

    pub fn from_linear(&self, n: usize) -> VoxelIndex {
        let i = n % self.extents[0];
        let j = (n / self.extents[0]) % self.extents[1];
        let k = n / (self.extents[0] * self.extents[1]);
        VoxelIndex::new(i as i32, j as i32, k as i32)
    }

    /// All voxel indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        (0..self.len()).map(|n| self.from_linear(n))
    }

    pub fn center(&self, v: VoxelIndex) -> Vec3 {
        let r = self.resolution;
        self.origin + Vec3::new((v.i as f64 + 0.5) * r, (v.j as f64 + 0.5) * r, (v.k as f64 + 0.5) * r)
    }

    /// Voxel containing `p`, or `None` outside the grid. Points on an
    /// interior boundary belong to the voxel on the positive side.
    pub fn voxel_of(&self, p: Vec3) -> Option<VoxelIndex> {
        if !p.is_finite() {
            return None;
        }
        let rel = p - self.origin;
        let mut v = VoxelIndex::new(0, 0, 0);
        for a in 0..3 {
            let c = (rel.axis(a) / self.resolution).floor();
            if c < 0.0 || c >= self.extents[a] as f64 {
                return None;
            }
            *v.axis_mut(a) = c as i32;
        }
        Some(v)
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        self.voxel_of(p).is_some()
    }

    /// Walks every voxel the segment `a → b` passes through, in order of
    /// increasing ray parameter, calling `visit(voxel, t_entry)` with
    /// `t_entry ∈ [0, 1]`. Returning `false` from `visit` stops the walk.
    /// The walk also stops where the segment leaves the grid. Exact-tie
    /// crossings (edges and corners) step one axis at a time, so the visited
    /// chain is face-connected. `a` must lie inside the grid.
    pub fn walk<F>(&self, a: Vec3, b: Vec3, mut visit: F)
    where
        F: FnMut(VoxelIndex, f64) -> bool,
    {
        let Some(mut v) = self.voxel_of(a) else {
            return;
        };
        let d = b - a;
        let mut step = [0i32; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for ax in 0..3 {
            let da = d.axis(ax);
            if da > 0.0 {
                step[ax] = 1;
                let boundary = self.origin.axis(ax) + (v.axis(ax) + 1) as f64 * self.resolution;
                t_max[ax] = (boundary - a.axis(ax)) / da;
                t_delta[ax] = self.resolution / da;
            } else if da < 0.0 {
                step[ax] = -1;
                let boundary = self.origin.axis(ax) + v.axis(ax) as f64 * self.resolution;
                t_max[ax] = (boundary - a.axis(ax)) / da;
                t_delta[ax] = -self.resolution / da;
            }
        }
        let mut t = 0.0;
        loop {
            if !visit(v, t) {
                return;
            }
            let ax = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            if t_max[ax] > 1.0 {
                return;
            }
            t = t_max[ax];
            *v.axis_mut(ax) += step[ax];
            if !self.contains(v) {
                return;
            }
            t_max[ax] += t_delta[ax];
        }
    }

    /// Parametric entry/exit of segment `a → b` through the closed box of
    /// voxel `v` (slab test), clipped to `[0, 1]`.
    pub fn segment_box_interval(&self, v: VoxelIndex, a: Vec3, b: Vec3) -> Option<(f64, f64)> {
        let lo = self.origin + Vec3::new(v.i as f64, v.j as f64, v.k as f64) * self.resolution;
        let hi = lo + Vec3::new(1.0, 1.0, 1.0) * self.resolution;
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for ax in 0..3 {
            let (o, dd, l, h) = (a.axis(ax), d.axis(ax), lo.axis(ax), hi.axis(ax));
            if dd == 0.0 {
                if o < l || o > h {
                    return None;
                }
            } else {
                let (mut ta, mut tb) = ((l - o) / dd, (h - o) / dd);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some((t0, t1))
    }
}

/// Normalizes an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r >= std::f64::consts::PI {
        r -= two_pi;
    }
    r
}
