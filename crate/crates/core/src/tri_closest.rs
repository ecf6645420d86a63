//! Exact point-to-triangle closest point.
//!
//! The constrained least-distance problem (nonnegative barycentric weights
//! summing to one) is solved in closed form by classifying which inequality
//! constraints are active at the optimum: none (face interior), one (edge),
//! or two (vertex).

use crate::math::Vec3;
use crate::mesh::DEGENERATE_AREA;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TriangleError {
    #[error("degenerate triangle (area {area:.3e} < {DEGENERATE_AREA})")]
    Degenerate { area: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct TriangleClosest {
    /// Barycentric weights over (v1, v2, v3); nonnegative, summing to 1.
    pub bary: [f64; 3],
    pub point: Vec3,
    /// Number of active inequality constraints: 0 interior, 1 edge, 2 vertex.
    pub active_set_size: u8,
}

impl TriangleClosest {
    pub fn distance_to(&self, x: Vec3) -> f64 {
        (x - self.point).norm()
    }
}

pub fn closest_point_on_triangle(
    x: Vec3,
    v1: Vec3,
    v2: Vec3,
    v3: Vec3,
) -> Result<TriangleClosest, TriangleError> {
    let area = 0.5 * (v2 - v1).cross(v3 - v1).norm();
    if area < DEGENERATE_AREA {
        return Err(TriangleError::Degenerate { area });
    }
    Ok(closest_point_on_triangle_unchecked(x, v1, v2, v3))
}

/// Same as [`closest_point_on_triangle`] without the degeneracy check;
/// meshes validated at load time can skip it in inner loops.
#[inline]
pub fn closest_point_on_triangle_unchecked(x: Vec3, a: Vec3, b: Vec3, c: Vec3) -> TriangleClosest {
    let ab = b - a;
    let ac = c - a;
    let ap = x - a;

    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return vertex_result(a, 0);
    }

    let bp = x - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return vertex_result(b, 1);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        // Edge ab.
        let t = d1 / (d1 - d3);
        return edge_result(a + ab * t, [1.0 - t, t, 0.0]);
    }

    let cp = x - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return vertex_result(c, 2);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        // Edge ac.
        let t = d2 / (d2 - d6);
        return edge_result(a + ac * t, [1.0 - t, 0.0, t]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        // Edge bc.
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return edge_result(b + (c - b) * t, [0.0, 1.0 - t, t]);
    }

    // Interior: full barycentric projection.
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    TriangleClosest {
        bary: [1.0 - v - w, v, w],
        point: a + ab * v + ac * w,
        active_set_size: 0,
    }
}

#[inline]
fn vertex_result(p: Vec3, which: usize) -> TriangleClosest {
    let mut bary = [0.0; 3];
    bary[which] = 1.0;
    TriangleClosest {
        bary,
        point: p,
        active_set_size: 2,
    }
}

#[inline]
fn edge_result(p: Vec3, bary: [f64; 3]) -> TriangleClosest {
    TriangleClosest {
        bary,
        point: p,
        active_set_size: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    const V1: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    const V2: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    const V3: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };

    #[test]
    fn above_centroid_is_interior() {
        let centroid = (V1 + V2 + V3) / 3.0;
        let x = centroid + Vec3::new(0.0, 0.0, 2.0);
        let r = closest_point_on_triangle(x, V1, V2, V3).unwrap();
        assert_eq!(r.active_set_size, 0);
        for c in r.bary {
            assert!((c - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((r.point - centroid).norm() < 1e-12);
    }

    #[test]
    fn beyond_vertex_clamps_to_vertex() {
        // Outward past v1, along the direction bisecting its adjacent edges.
        let x = Vec3::new(-1.0, -1.0, 0.3);
        let r = closest_point_on_triangle(x, V1, V2, V3).unwrap();
        assert_eq!(r.active_set_size, 2);
        assert_eq!(r.bary, [1.0, 0.0, 0.0]);
        assert_eq!(r.point, V1);
    }

    #[test]
    fn beside_edge_clamps_to_edge() {
        let x = Vec3::new(0.5, -2.0, 0.0);
        let r = closest_point_on_triangle(x, V1, V2, V3).unwrap();
        assert_eq!(r.active_set_size, 1);
        assert!((r.point - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn degenerate_rejected() {
        let err = closest_point_on_triangle(Vec3::ZERO, V1, V2, Vec3::new(2.0, 0.0, 0.0));
        assert!(err.is_err());
    }

    /// KKT stationarity: the residual x - p must be orthogonal to every
    /// feasible direction at the optimum (free barycentric directions).
    #[test]
    fn kkt_conditions_hold() {
        let rng = CounterRng::new(11);
        for i in 0..2000u64 {
            let p = |k: u64| rng.uniform(i, k) * 4.0 - 2.0;
            let x = Vec3::new(p(0), p(1), p(2));
            let r = closest_point_on_triangle(x, V1, V2, V3).unwrap();
            let res = x - r.point;
            let verts = [V1, V2, V3];
            // Directions toward vertices with zero weight must not improve.
            for j in 0..3 {
                let d = verts[j] - r.point;
                if r.bary[j] > 1e-12 {
                    // Free coordinate: gradient component must vanish.
                    assert!(res.dot(d).abs() < 1e-10, "stationarity violated: {}", res.dot(d));
                } else {
                    // Active constraint: moving inward must not decrease distance.
                    assert!(res.dot(d) < 1e-10, "dual feasibility violated: {}", res.dot(d));
                }
            }
        }
    }

    /// Dense barycentric grid search oracle.
    #[test]
    fn matches_grid_search_oracle() {
        let rng = CounterRng::new(5);
        for i in 0..200u64 {
            let p = |k: u64| rng.uniform(i, k) * 6.0 - 3.0;
            let x = Vec3::new(p(0), p(1), p(2));
            let a = Vec3::new(p(3), p(4), p(5));
            let b = Vec3::new(p(6), p(7), p(8));
            let c = Vec3::new(p(9), p(10), p(11));
            if 0.5 * (b - a).cross(c - a).norm() < 1e-6 {
                continue;
            }
            let r = closest_point_on_triangle(x, a, b, c).unwrap();
            // Grid over the simplex, then a local polish step.
            let n = 300;
            let mut best = f64::INFINITY;
            for u in 0..=n {
                for v in 0..=(n - u) {
                    let cu = u as f64 / n as f64;
                    let cv = v as f64 / n as f64;
                    let point = a * cu + b * cv + c * (1.0 - cu - cv);
                    best = best.min((x - point).norm());
                }
            }
            let d = r.distance_to(x);
            assert!(
                d <= best + 1e-6,
                "solver distance {d} worse than grid oracle {best}"
            );
            // Grid can only be worse than the true optimum.
            assert!(best >= d - 1e-12);
        }
    }

    #[test]
    fn barycentric_sums_to_one() {
        let rng = CounterRng::new(3);
        for i in 0..5000u64 {
            let p = |k: u64| rng.uniform(i, k) * 4.0 - 2.0;
            let x = Vec3::new(p(0), p(1), p(2));
            let r = closest_point_on_triangle(x, V1, V2, V3).unwrap();
            let s: f64 = r.bary.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(r.bary.iter().all(|&c| c >= 0.0));
        }
    }
}
