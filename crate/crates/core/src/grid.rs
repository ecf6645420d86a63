//! Uniform voxel grid over a mesh and the shell-expansion closest-point
//! search that it accelerates.
//!
//! Faces are binned conservatively into every voxel their triangle overlaps.
//! Closest-point queries expand outward from the query's voxel ring by ring
//! and stop once the best distance found is provably at least as good as
//! anything a farther ring could hold, so the result is exactly the global
//! minimum over all faces.

use crate::math::{Aabb, Vec3};
use crate::mesh::TriMesh;
use crate::tri_closest::closest_point_on_triangle_unchecked;
use rayon::prelude::*;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid resolution must be >= 2, got {0}")]
    BadResolution(u32),
}

#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    /// Per-voxel overlapping face indices, ascending.
    pub cells: Vec<Vec<u32>>,
    /// Lattice coordinates of every non-empty voxel, grouped by block,
    /// for queries that start far from the surface.
    pub occupied: Vec<[u32; 3]>,
    /// Bounding boxes over groups of nearby occupied voxels; lets the
    /// far-query scan prune whole groups at once.
    blocks: Vec<OccupiedBlock>,
    /// For every grid voxel, the index (into `occupied`) of a nearby
    /// occupied voxel, from a multi-source flood fill. Seeds the search
    /// with a tight upper bound in one lookup.
    nearest_occupied: Vec<u32>,
}

/// Voxels are grouped into 4x4x4 blocks; only non-empty blocks are kept.
#[derive(Debug, Clone)]
struct OccupiedBlock {
    bbox: Aabb,
    /// Member range in `occupied`.
    start: u32,
    end: u32,
}

const BLOCK_EDGE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub face: u32,
    pub bary: [f64; 3],
    pub point: Vec3,
    pub distance: f64,
}

/// Reusable per-thread scratch for batch queries: a face-visited stamp
/// buffer avoids re-testing faces shared across voxels.
#[derive(Debug, Default)]
pub struct QueryScratch {
    visited: Vec<u32>,
    stamp: u32,
}

impl VoxelGrid {
    /// Bins all mesh faces into a uniform grid with `resolution` target
    /// cells along the longest bounding-box axis and a one-cell margin.
    pub fn build(mesh: &TriMesh, resolution: u32) -> Result<VoxelGrid, GridError> {
        if resolution < 2 {
            return Err(GridError::BadResolution(resolution));
        }
        let bbox = mesh.bbox();
        let longest = bbox.extent().max_component();
        let cell_size = longest * (1.0 + 1e-9) / resolution as f64;
        let dims = [
            (bbox.extent().x / cell_size).ceil() as usize + 2,
            (bbox.extent().y / cell_size).ceil() as usize + 2,
            (bbox.extent().z / cell_size).ceil() as usize + 2,
        ];
        let origin = bbox.min - Vec3::splat(cell_size);
        let mut cells = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let half = Vec3::splat(cell_size * 0.5);
        for (fi, _) in mesh.faces.iter().enumerate() {
            let tri = mesh.face_vertices(fi);
            let tb = Aabb::from_points(tri);
            // One extra voxel each way so boxes that merely touch the
            // triangle's bounding planes are still tested (SAT counts
            // touching as overlap).
            let lo = [
                (((tb.min.x - origin.x) / cell_size).floor() as i64 - 1).max(0) as usize,
                (((tb.min.y - origin.y) / cell_size).floor() as i64 - 1).max(0) as usize,
                (((tb.min.z - origin.z) / cell_size).floor() as i64 - 1).max(0) as usize,
            ];
            let hi = [
                ((((tb.max.x - origin.x) / cell_size).floor() as i64 + 1) as usize).min(dims[0] - 1),
                ((((tb.max.y - origin.y) / cell_size).floor() as i64 + 1) as usize).min(dims[1] - 1),
                ((((tb.max.z - origin.z) / cell_size).floor() as i64 + 1) as usize).min(dims[2] - 1),
            ];
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        let center = origin
                            + Vec3::new(
                                (i as f64 + 0.5) * cell_size,
                                (j as f64 + 0.5) * cell_size,
                                (k as f64 + 0.5) * cell_size,
                            );
                        if tri_box_overlap(center, half, tri) {
                            cells[(i * dims[1] + j) * dims[2] + k].push(fi as u32);
                        }
                    }
                }
            }
        }
        let mut occupied: Vec<[u32; 3]> = (0..dims[0])
            .flat_map(|i| (0..dims[1]).flat_map(move |j| (0..dims[2]).map(move |k| (i, j, k))))
            .filter(|&(i, j, k)| !cells[(i * dims[1] + j) * dims[2] + k].is_empty())
            .map(|(i, j, k)| [i as u32, j as u32, k as u32])
            .collect();

        // Group occupied voxels into blocks and record each block's box.
        let block_key =
            |v: &[u32; 3]| (v[0] as usize / BLOCK_EDGE, v[1] as usize / BLOCK_EDGE, v[2] as usize / BLOCK_EDGE);
        occupied.sort_by_key(|v| {
            let (a, b, c) = block_key(v);
            (a, b, c, v[0], v[1], v[2])
        });
        let voxel_box = |v: &[u32; 3]| -> Aabb {
            let min = origin
                + Vec3::new(
                    v[0] as f64 * cell_size,
                    v[1] as f64 * cell_size,
                    v[2] as f64 * cell_size,
                );
            Aabb { min, max: min + Vec3::splat(cell_size) }
        };
        let mut blocks = Vec::new();
        let mut start = 0usize;
        while start < occupied.len() {
            let key = block_key(&occupied[start]);
            let mut end = start;
            let mut bbox = voxel_box(&occupied[start]);
            while end < occupied.len() && block_key(&occupied[end]) == key {
                let vb = voxel_box(&occupied[end]);
                bbox.min = bbox.min.min(vb.min);
                bbox.max = bbox.max.max(vb.max);
                end += 1;
            }
            blocks.push(OccupiedBlock { bbox, start: start as u32, end: end as u32 });
            start = end;
        }

        // Multi-source flood fill: every voxel learns a nearby occupied
        // voxel (6-neighbor breadth-first, so approximately the nearest).
        let n_cells = dims[0] * dims[1] * dims[2];
        let flat = |v: [usize; 3]| (v[0] * dims[1] + v[1]) * dims[2] + v[2];
        let mut nearest_occupied = vec![u32::MAX; n_cells];
        let mut queue = std::collections::VecDeque::with_capacity(occupied.len());
        for (oi, v) in occupied.iter().enumerate() {
            let f = flat([v[0] as usize, v[1] as usize, v[2] as usize]);
            nearest_occupied[f] = oi as u32;
            queue.push_back([v[0] as usize, v[1] as usize, v[2] as usize]);
        }
        while let Some(v) = queue.pop_front() {
            let oi = nearest_occupied[flat(v)];
            for axis in 0..3 {
                for step in [-1i64, 1] {
                    let mut n = [v[0] as i64, v[1] as i64, v[2] as i64];
                    n[axis] += step;
                    if n[axis] < 0 || n[axis] as usize >= dims[axis] {
                        continue;
                    }
                    let n = [n[0] as usize, n[1] as usize, n[2] as usize];
                    if nearest_occupied[flat(n)] == u32::MAX {
                        nearest_occupied[flat(n)] = oi;
                        queue.push_back(n);
                    }
                }
            }
        }

        Ok(VoxelGrid {
            origin,
            cell_size,
            dims,
            cells,
            occupied,
            blocks,
            nearest_occupied,
        })
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn faces_in(&self, v: [usize; 3]) -> &[u32] {
        &self.cells[self.cell_index(v[0], v[1], v[2])]
    }

    /// Lattice coordinates of the voxel containing `p` (may lie outside
    /// the grid bounds).
    #[inline]
    pub fn lattice_coords(&self, p: Vec3) -> [i64; 3] {
        [
            ((p.x - self.origin.x) / self.cell_size).floor() as i64,
            ((p.y - self.origin.y) / self.cell_size).floor() as i64,
            ((p.z - self.origin.z) / self.cell_size).floor() as i64,
        ]
    }

    #[inline]
    pub fn in_bounds(&self, c: [i64; 3]) -> bool {
        (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < self.dims[a])
    }

    pub fn voxel_box(&self, c: [i64; 3]) -> Aabb {
        let min = self.origin
            + Vec3::new(
                c[0] as f64 * self.cell_size,
                c[1] as f64 * self.cell_size,
                c[2] as f64 * self.cell_size,
            );
        Aabb {
            min,
            max: min + Vec3::splat(self.cell_size),
        }
    }

    pub fn bounds(&self) -> Aabb {
        Aabb {
            min: self.origin,
            max: self.origin
                + Vec3::new(
                    self.dims[0] as f64 * self.cell_size,
                    self.dims[1] as f64 * self.cell_size,
                    self.dims[2] as f64 * self.cell_size,
                ),
        }
    }

    /// Yields the non-empty voxels in nondecreasing order of a true
    /// Euclidean lower bound on the distance from any point of the seed
    /// voxel to any point of the yielded voxel (axis-wise box gaps).
    pub fn shells(&self, seed: [usize; 3]) -> ShellIter<'_> {
        ShellIter {
            grid: self,
            seed: [seed[0] as i64, seed[1] as i64, seed[2] as i64],
            ring: 0,
            max_ring: self.max_ring([seed[0] as i64, seed[1] as i64, seed[2] as i64]),
            heap: BinaryHeap::new(),
        }
    }

    /// Largest Chebyshev ring around `seed` that still touches the grid.
    fn max_ring(&self, seed: [i64; 3]) -> i64 {
        let mut r = 0i64;
        for a in 0..3 {
            r = r.max(seed[a]).max(self.dims[a] as i64 - 1 - seed[a]);
        }
        r
    }

    /// Exact closest point on the mesh surface, with ties broken to the
    /// lowest face index.
    pub fn closest_point(&self, mesh: &TriMesh, x: Vec3) -> ClosestPoint {
        let mut scratch = QueryScratch::default();
        self.closest_point_with(mesh, x, &mut scratch)
    }

    pub fn closest_point_with(
        &self,
        mesh: &TriMesh,
        x: Vec3,
        scratch: &mut QueryScratch,
    ) -> ClosestPoint {
        if scratch.visited.len() < mesh.faces.len() {
            scratch.visited = vec![0; mesh.faces.len()];
            scratch.stamp = 0;
        }
        scratch.stamp = scratch.stamp.wrapping_add(1);
        if scratch.stamp == 0 {
            scratch.visited.fill(0);
            scratch.stamp = 1;
        }
        let stamp = scratch.stamp;

        let seed = self.lattice_coords(x);
        let max_ring = self.max_ring(seed);
        let mut best: Option<(f64, u32, [f64; 3], Vec3)> = None;

        // Past this ring, enumerating ring voxels (mostly empty for
        // queries far from the surface) costs more than scanning the
        // non-empty voxel list directly.
        const LOCAL_RINGS: i64 = 2;

        let test_voxel = |c: [i64; 3],
                              best: &mut Option<(f64, u32, [f64; 3], Vec3)>,
                              scratch: &mut QueryScratch| {
            if let Some((d2, ..)) = *best {
                if self.voxel_box(c).distance_sq(x) >= d2 {
                    return;
                }
            }
            for &fi in self.faces_in([c[0] as usize, c[1] as usize, c[2] as usize]) {
                if scratch.visited[fi as usize] == stamp {
                    continue;
                }
                scratch.visited[fi as usize] = stamp;
                let [a, b, cc] = mesh.face_vertices(fi as usize);
                let r = closest_point_on_triangle_unchecked(x, a, b, cc);
                let d2 = (x - r.point).norm_sq();
                let better = match *best {
                    None => true,
                    Some((bd2, bf, ..)) => d2 < bd2 || (d2 == bd2 && fi < bf),
                };
                if better {
                    *best = Some((d2, fi, r.bary, r.point));
                }
            }
        };

        let mut ring = 0i64;
        let mut proven = false;
        while ring <= max_ring {
            // Everything not yet visited sits at Chebyshev ring >= ring,
            // whose boxes are at least (ring - 1) * cell_size away from x
            // (x sits somewhere inside the seed voxel).
            if let Some((d2, ..)) = best {
                let bound = (ring - 1).max(0) as f64 * self.cell_size;
                if d2 <= bound * bound {
                    proven = true;
                    break;
                }
            }
            if ring > LOCAL_RINGS {
                break;
            }
            self.for_ring(seed, ring, |c| test_voxel(c, &mut best, scratch));
            ring += 1;
        }

        if !proven && ring <= max_ring {
            // Fall back to the non-empty voxels, pruned block by block.
            // Faces already tested are skipped by their stamp. The flood
            // fill supplies a near-optimal upper bound up front, so most
            // blocks fail their box test immediately.
            let clamped = [
                (seed[0].max(0) as usize).min(self.dims[0] - 1),
                (seed[1].max(0) as usize).min(self.dims[1] - 1),
                (seed[2].max(0) as usize).min(self.dims[2] - 1),
            ];
            let oi = self.nearest_occupied[self.cell_index(clamped[0], clamped[1], clamped[2])];
            let v = self.occupied[oi as usize];
            test_voxel([v[0] as i64, v[1] as i64, v[2] as i64], &mut best, scratch);
            for block in &self.blocks {
                if let Some((d2, ..)) = best {
                    if block.bbox.distance_sq(x) >= d2 {
                        continue;
                    }
                }
                for v in &self.occupied[block.start as usize..block.end as usize] {
                    test_voxel([v[0] as i64, v[1] as i64, v[2] as i64], &mut best, scratch);
                }
            }
        }

        let (d2, face, bary, point) = best.expect("grid covers all faces");
        ClosestPoint {
            face,
            bary,
            point,
            distance: d2.sqrt(),
        }
    }

    /// Visits all in-bounds lattice cells at exactly Chebyshev distance
    /// `ring` from `seed`.
    fn for_ring(&self, seed: [i64; 3], ring: i64, mut f: impl FnMut([i64; 3])) {
        if ring == 0 {
            let c = seed;
            if self.in_bounds(c) {
                f(c);
            }
            return;
        }
        let r = ring;
        for di in -r..=r {
            for dj in -r..=r {
                if di.abs() == r || dj.abs() == r {
                    // Full column in k.
                    for dk in -r..=r {
                        let c = [seed[0] + di, seed[1] + dj, seed[2] + dk];
                        if self.in_bounds(c) {
                            f(c);
                        }
                    }
                } else {
                    for dk in [-r, r] {
                        let c = [seed[0] + di, seed[1] + dj, seed[2] + dk];
                        if self.in_bounds(c) {
                            f(c);
                        }
                    }
                }
            }
        }
    }

    /// Parallel batch closest-point; deterministic and order-independent.
    pub fn closest_point_batch(&self, mesh: &TriMesh, points: &[Vec3]) -> Vec<ClosestPoint> {
        points
            .par_iter()
            .map_init(QueryScratch::default, |scratch, &p| {
                self.closest_point_with(mesh, p, scratch)
            })
            .collect()
    }

    /// Walks the voxels pierced by the ray (3D digital differential
    /// analyzer) and hands each non-empty face list to `f`. Used by the
    /// accelerated ray caster.
    pub fn walk_ray(&self, o: Vec3, d: Vec3, mut f: impl FnMut(&[u32])) {
        let bounds = self.bounds();
        let Some((t0, t1)) = bounds.ray_interval(o, d) else {
            return;
        };
        let t1 = t1.max(0.0);
        let t0 = t0.max(0.0);
        if t0 > t1 {
            return;
        }
        let entry = o + d * (t0 + 1e-12);
        let mut c = self.lattice_coords(entry);
        for a in 0..3 {
            c[a] = c[a].clamp(0, self.dims[a] as i64 - 1);
        }
        let step = [
            if d.x > 0.0 { 1i64 } else { -1 },
            if d.y > 0.0 { 1 } else { -1 },
            if d.z > 0.0 { 1 } else { -1 },
        ];
        let mut t_next = [0.0f64; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let da = d.axis(a);
            if da.abs() > 1e-300 {
                let boundary = self.origin.axis(a)
                    + (c[a] + if step[a] > 0 { 1 } else { 0 }) as f64 * self.cell_size;
                t_next[a] = (boundary - o.axis(a)) / da;
                t_delta[a] = self.cell_size / da.abs();
            } else {
                t_next[a] = f64::INFINITY;
            }
        }
        loop {
            let faces = self.faces_in([c[0] as usize, c[1] as usize, c[2] as usize]);
            if !faces.is_empty() {
                f(faces);
            }
            let axis = if t_next[0] <= t_next[1] && t_next[0] <= t_next[2] {
                0
            } else if t_next[1] <= t_next[2] {
                1
            } else {
                2
            };
            if t_next[axis] > t1 {
                break;
            }
            c[axis] += step[axis];
            if c[axis] < 0 || c[axis] >= self.dims[axis] as i64 {
                break;
            }
            t_next[axis] += t_delta[axis];
        }
    }
}

/// One entry yielded by [`VoxelGrid::shells`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellVoxel {
    pub voxel: [usize; 3],
    pub lower_bound_distance: f64,
}

pub struct ShellIter<'a> {
    grid: &'a VoxelGrid,
    seed: [i64; 3],
    ring: i64,
    max_ring: i64,
    // Max-heap inverted via bit tricks: lower bounds are nonnegative so
    // their IEEE bit patterns order like the floats.
    heap: BinaryHeap<(std::cmp::Reverse<u64>, [usize; 3])>,
}

impl ShellIter<'_> {
    fn ring_min_bound(&self, ring: i64) -> f64 {
        ((ring - 1).max(0)) as f64 * self.grid.cell_size
    }

    fn push_ring(&mut self, ring: i64) {
        let grid = self.grid;
        let seed = self.seed;
        let cell = grid.cell_size;
        let mut pending = Vec::new();
        grid.for_ring(seed, ring, |c| {
            let idx = [c[0] as usize, c[1] as usize, c[2] as usize];
            if grid.faces_in(idx).is_empty() {
                return;
            }
            let mut lb2 = 0.0;
            for a in 0..3 {
                let gap = ((c[a] - seed[a]).abs() - 1).max(0) as f64 * cell;
                lb2 += gap * gap;
            }
            pending.push((std::cmp::Reverse(lb2.sqrt().to_bits()), idx));
        });
        self.heap.extend(pending);
    }
}

impl Iterator for ShellIter<'_> {
    type Item = ShellVoxel;

    fn next(&mut self) -> Option<ShellVoxel> {
        loop {
            // A heap entry may be emitted once no future ring can beat it.
            if let Some(&(std::cmp::Reverse(bits), voxel)) = self.heap.peek() {
                let lb = f64::from_bits(bits);
                if self.ring > self.max_ring || lb <= self.ring_min_bound(self.ring) {
                    self.heap.pop();
                    return Some(ShellVoxel {
                        voxel,
                        lower_bound_distance: lb,
                    });
                }
            } else if self.ring > self.max_ring {
                return None;
            }
            let r = self.ring;
            self.ring += 1;
            self.push_ring(r);
        }
    }
}

/// Brute-force closest point over every face; the oracle the grid must
/// match bit-for-bit, including the first-index tie rule.
pub fn brute_force_closest_point(mesh: &TriMesh, x: Vec3) -> ClosestPoint {
    let mut best: Option<(f64, u32, [f64; 3], Vec3)> = None;
    for fi in 0..mesh.faces.len() {
        let [a, b, c] = mesh.face_vertices(fi);
        let r = closest_point_on_triangle_unchecked(x, a, b, c);
        let d2 = (x - r.point).norm_sq();
        if best.map_or(true, |(bd2, ..)| d2 < bd2) {
            best = Some((d2, fi as u32, r.bary, r.point));
        }
    }
    let (d2, face, bary, point) = best.expect("non-empty mesh");
    ClosestPoint {
        face,
        bary,
        point,
        distance: d2.sqrt(),
    }
}

pub fn brute_force_closest_point_batch(mesh: &TriMesh, points: &[Vec3]) -> Vec<ClosestPoint> {
    points
        .par_iter()
        .map(|&p| brute_force_closest_point(mesh, p))
        .collect()
}

/// Separating-axis triangle vs axis-aligned box overlap (13 axes).
pub fn tri_box_overlap(center: Vec3, half: Vec3, tri: [Vec3; 3]) -> bool {
    let v0 = tri[0] - center;
    let v1 = tri[1] - center;
    let v2 = tri[2] - center;
    let e0 = v1 - v0;
    let e1 = v2 - v1;
    let e2 = v0 - v2;

    // Box face normals.
    for a in 0..3 {
        let lo = v0.axis(a).min(v1.axis(a)).min(v2.axis(a));
        let hi = v0.axis(a).max(v1.axis(a)).max(v2.axis(a));
        if lo > half.axis(a) || hi < -half.axis(a) {
            return false;
        }
    }

    // Triangle normal.
    let n = e0.cross(e1);
    let r = half.x * n.x.abs() + half.y * n.y.abs() + half.z * n.z.abs();
    let d = n.dot(v0);
    if d.abs() > r {
        return false;
    }

    // Nine edge cross products.
    let axes = |e: Vec3| {
        [
            Vec3::new(0.0, -e.z, e.y),
            Vec3::new(e.z, 0.0, -e.x),
            Vec3::new(-e.y, e.x, 0.0),
        ]
    };
    for e in [e0, e1, e2] {
        for ax in axes(e) {
            let p0 = ax.dot(v0);
            let p1 = ax.dot(v1);
            let p2 = ax.dot(v2);
            let lo = p0.min(p1).min(p2);
            let hi = p0.max(p1).max(p2);
            let r = half.x * ax.x.abs() + half.y * ax.y.abs() + half.z * ax.z.abs();
            if lo > r || hi < -r {
                return false;
            }
        }
    }
    true
}
