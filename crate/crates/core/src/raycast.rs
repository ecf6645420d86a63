//! Ray-triangle intersection, brute force and grid accelerated.

use crate::grid::VoxelGrid;
use crate::math::Vec3;
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub face: u32,
    /// Barycentric coordinates over the face's vertices; sums to 1,
    /// each component >= -1e-9.
    pub bary: [f64; 3],
}

/// Moller-Trumbore. Returns (t, u, v) with u, v the barycentric weights of
/// the second and third vertices. Boundary hits (bary exactly 0) are
/// accepted; parity consumers detect and re-cast those.
#[inline]
pub fn ray_triangle(o: Vec3, d: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Option<(f64, f64, f64)> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = d.dot(q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(q) * inv;
    if t <= 0.0 {
        return None;
    }
    Some((t, u, v))
}

fn sort_hits(mut hits: Vec<RayHit>) -> Vec<RayHit> {
    hits.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.face.cmp(&y.face)));
    hits
}

/// All intersections with t > 0, ascending, against every face.
pub fn intersect_ray_brute(mesh: &TriMesh, o: Vec3, d: Vec3) -> Vec<RayHit> {
    let mut hits = Vec::new();
    for fi in 0..mesh.faces.len() {
        let [a, b, c] = mesh.face_vertices(fi);
        if let Some((t, u, v)) = ray_triangle(o, d, a, b, c) {
            hits.push(RayHit {
                t,
                face: fi as u32,
                bary: [1.0 - u - v, u, v],
            });
        }
    }
    sort_hits(hits)
}

/// Grid-accelerated intersection; identical hit set to
/// [`intersect_ray_brute`] because binning is conservative.
pub fn intersect_ray(mesh: &TriMesh, grid: &VoxelGrid, o: Vec3, d: Vec3) -> Vec<RayHit> {
    debug_assert!((d.norm() - 1.0).abs() < 1e-9, "direction must be unit");
    let mut hits = Vec::new();
    let mut visited = vec![false; mesh.faces.len()];
    grid.walk_ray(o, d, |faces| {
        for &fi in faces {
            if visited[fi as usize] {
                continue;
            }
            visited[fi as usize] = true;
            let [a, b, c] = mesh.face_vertices(fi as usize);
            if let Some((t, u, v)) = ray_triangle(o, d, a, b, c) {
                hits.push(RayHit {
                    t,
                    face: fi,
                    bary: [1.0 - u - v, u, v],
                });
            }
        }
    });
    sort_hits(hits)
}

pub fn first_hit(mesh: &TriMesh, grid: &VoxelGrid, o: Vec3, d: Vec3) -> Option<RayHit> {
    intersect_ray(mesh, grid, o, d).into_iter().next()
}

/// A hit list is unreliable for crossing parity when any hit grazes a
/// triangle boundary or two hits nearly coincide (shared edge or vertex
/// counted twice).
pub fn hits_ambiguous_for_parity(hits: &[RayHit]) -> bool {
    for h in hits {
        if h.bary.iter().any(|&b| b < 1e-9) {
            return true;
        }
    }
    hits.windows(2).any(|w| (w[1].t - w[0].t).abs() < 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::shapes;

    #[test]
    fn axis_ray_through_cube() {
        let cube = shapes::cube(1.0);
        let grid = VoxelGrid::build(&cube, 4).unwrap();
        // Off-center: a ray through (0, 0) would graze the diagonal shared
        // by both triangles of each wall and legitimately hit four faces.
        let hits = intersect_ray(&cube, &grid, Vec3::new(-2.0, 0.1, 0.2), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(hits.len(), 2);
        assert!((hits[0].t - 1.5).abs() < 1e-12);
        assert!((hits[1].t - 2.5).abs() < 1e-12);
    }

    #[test]
    fn miss_returns_empty() {
        let cube = shapes::cube(1.0);
        let grid = VoxelGrid::build(&cube, 4).unwrap();
        let hits = intersect_ray(&cube, &grid, Vec3::new(-2.0, 3.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        assert!(hits.is_empty());
    }

    #[test]
    fn grazing_edge_is_flagged_ambiguous() {
        let cube = shapes::cube(1.0);
        // Ray along the cube edge y = 0.5, z = 0.5 plane boundary.
        let hits = intersect_ray_brute(&cube, Vec3::new(-2.0, 0.5, 0.0), Vec3::new(1.0, 0.0, 0.0));
        assert!(hits.is_empty() || hits_ambiguous_for_parity(&hits));
    }

    #[test]
    fn barycentric_reconstructs_hit_point() {
        let sphere = shapes::icosphere(2, 1.0);
        let grid = VoxelGrid::build(&sphere, 8).unwrap();
        let rng = CounterRng::new(21);
        for i in 0..500u64 {
            let o = Vec3::new(
                (rng.uniform(i, 0) - 0.5) * 6.0,
                (rng.uniform(i, 1) - 0.5) * 6.0,
                (rng.uniform(i, 2) - 0.5) * 6.0,
            );
            let d = Vec3::new(
                rng.uniform(i, 3) - 0.5,
                rng.uniform(i, 4) - 0.5,
                rng.uniform(i, 5) - 0.5,
            )
            .normalized();
            for h in intersect_ray(&sphere, &grid, o, d) {
                let [a, b, c] = sphere.face_vertices(h.face as usize);
                let p = a * h.bary[0] + b * h.bary[1] + c * h.bary[2];
                let on_ray = o + d * h.t;
                assert!((p - on_ray).norm() < 1e-7);
                let sum: f64 = h.bary.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(h.bary.iter().all(|&v| v >= -1e-9));
            }
        }
    }

    #[test]
    fn accelerated_matches_brute_force() {
        let sphere = shapes::icosphere(2, 1.0);
        let grid = VoxelGrid::build(&sphere, 8).unwrap();
        let rng = CounterRng::new(99);
        for i in 0..2000u64 {
            let o = Vec3::new(
                (rng.uniform(i, 0) - 0.5) * 8.0,
                (rng.uniform(i, 1) - 0.5) * 8.0,
                (rng.uniform(i, 2) - 0.5) * 8.0,
            );
            let d = Vec3::new(
                rng.uniform(i, 3) - 0.5,
                rng.uniform(i, 4) - 0.5,
                rng.uniform(i, 5) - 0.5,
            )
            .normalized();
            let fast = intersect_ray(&sphere, &grid, o, d);
            let slow = intersect_ray_brute(&sphere, o, d);
            assert_eq!(fast.len(), slow.len(), "ray {i}: hit counts differ");
            for (f, s) in fast.iter().zip(&slow) {
                assert_eq!(f.face, s.face);
                assert_eq!(f.t.to_bits(), s.t.to_bits());
            }
        }
    }
}
