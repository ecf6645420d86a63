//! Signed distance body embedding over a watertight triangle mesh.
//!
//! Sign convention: +1 INSIDE the mesh, -1 outside. This is the opposite
//! of the common graphics convention; the SDF of a point inside a unit
//! sphere of radius r is +(r - ||x||), so occupancy thresholds compare
//! directly against positive-inside distances.

use crate::grid::{ClosestPoint, QueryScratch, VoxelGrid};
use crate::math::{Aabb, Mat3, Vec3};
use crate::mesh::TriMesh;
use crate::raycast::{hits_ambiguous_for_parity, intersect_ray};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

/// Queries closer to the surface than this are treated as on-surface:
/// sdf reports 0 and the gradient is undefined.
pub const ON_SURFACE_EPS: f64 = 1e-9;
/// Minimum |sdf| for a well-defined gradient.
pub const GRADIENT_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum SdfError {
    #[error("mesh is not watertight; the sign function is undefined")]
    NotWatertight,
    #[error("point is on the surface (|distance| = {distance:.3e}); gradient undefined")]
    OnSurface { distance: f64 },
    #[error("mesh has no canonical vertex buffer")]
    MissingCanonical,
}

/// The per-point body shape encoding: signed distance, its gradient, and
/// the closest point re-expressed on the canonical-pose mesh.
#[derive(Debug, Clone, Copy)]
pub struct BodyEmbedding {
    /// Signed meters, positive inside.
    pub sdf: f64,
    /// Unit vector `sign * (x - v) / ||x - v||`.
    pub grad: Vec3,
    /// Closest point mapped onto the canonical mesh.
    pub canonical_point: Vec3,
    /// The face all three components were derived from.
    pub face: u32,
}

/// Signed-distance queries over one mesh + grid pair. Watertightness is
/// verified once at construction.
pub struct SignedDistance<'a> {
    pub mesh: &'a TriMesh,
    pub grid: &'a VoxelGrid,
    bbox_diag: f64,
}

/// Fixed, irrational-ish parity ray direction; no mesh in practice has a
/// face plane aligned with it, and it is deterministic.
const PARITY_DIR: Vec3 = Vec3 {
    x: 0.577_350_269_189_625_8,
    y: 0.577_350_269_189_625_8,
    z: 0.577_350_269_189_625_8,
};

impl<'a> SignedDistance<'a> {
    pub fn new(mesh: &'a TriMesh, grid: &'a VoxelGrid) -> Result<Self, SdfError> {
        if !mesh.is_watertight() {
            return Err(SdfError::NotWatertight);
        }
        Ok(SignedDistance {
            mesh,
            grid,
            bbox_diag: mesh.bbox().diagonal(),
        })
    }

    /// Ray-crossing parity: +1 inside, -1 outside. Edge-grazing casts are
    /// re-tried from a deterministically perturbed origin (up to 3 times).
    pub fn sign_of(&self, x: Vec3) -> i32 {
        let mut origin = x;
        let mut parity = 0usize;
        for attempt in 0..3 {
            let hits = intersect_ray(self.mesh, self.grid, origin, PARITY_DIR);
            parity = hits.len();
            if !hits_ambiguous_for_parity(&hits) {
                break;
            }
            // Deterministic epsilon along a fixed tie-break axis.
            let eps = 1e-9 * self.bbox_diag * (attempt + 1) as f64;
            origin = x + Vec3::new(eps, 2.0 * eps, 3.0 * eps);
        }
        if parity % 2 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn closest_point(&self, x: Vec3) -> ClosestPoint {
        self.grid.closest_point(self.mesh, x)
    }

    /// `sign(x) * ||x - v||`; exactly 0 within the on-surface band.
    pub fn sdf(&self, x: Vec3) -> f64 {
        let cp = self.closest_point(x);
        self.signed_from(x, &cp)
    }

    fn signed_from(&self, x: Vec3, cp: &ClosestPoint) -> f64 {
        if cp.distance <= ON_SURFACE_EPS {
            return 0.0;
        }
        self.sign_of(x) as f64 * cp.distance
    }

    /// `sign(x) * (x - v)/||x - v||` using the first-indexed closest point.
    pub fn gradient(&self, x: Vec3) -> Result<Vec3, SdfError> {
        let cp = self.closest_point(x);
        if cp.distance <= GRADIENT_EPS {
            return Err(SdfError::OnSurface { distance: cp.distance });
        }
        Ok((x - cp.point) * (self.sign_of(x) as f64 / cp.distance))
    }

    /// Full embedding from a single closest-point search, so the SDF,
    /// gradient, and canonical correspondence all agree on the face and
    /// tie-breaking.
    pub fn embedding(&self, x: Vec3) -> Result<BodyEmbedding, SdfError> {
        let mut scratch = QueryScratch::default();
        self.embedding_with(x, &mut scratch)
    }

    pub fn embedding_with(
        &self,
        x: Vec3,
        scratch: &mut QueryScratch,
    ) -> Result<BodyEmbedding, SdfError> {
        if self.mesh.canonical_vertices.is_none() {
            return Err(SdfError::MissingCanonical);
        }
        let cp = self.grid.closest_point_with(self.mesh, x, scratch);
        if cp.distance <= GRADIENT_EPS {
            return Err(SdfError::OnSurface { distance: cp.distance });
        }
        let sign = self.sign_of(x) as f64;
        let canonical_point = self
            .mesh
            .canonical_point(cp.face as usize, cp.bary)
            .map_err(|_| SdfError::MissingCanonical)?;
        Ok(BodyEmbedding {
            sdf: sign * cp.distance,
            grad: (x - cp.point) * (sign / cp.distance),
            canonical_point,
            face: cp.face,
        })
    }

    pub fn embedding_batch(&self, points: &[Vec3]) -> Vec<Result<BodyEmbedding, SdfError>> {
        points
            .par_iter()
            .map_init(QueryScratch::default, |scratch, &p| {
                self.embedding_with(p, scratch)
            })
            .collect()
    }
}

/// Canonical correspondence: the same barycentric weights applied to the
/// canonical vertex buffer of the face.
pub fn canonical_correspondence(
    mesh: &TriMesh,
    face: u32,
    bary: [f64; 3],
) -> Result<Vec3, SdfError> {
    mesh.canonical_point(face as usize, bary)
        .map_err(|_| SdfError::MissingCanonical)
}

/// Rigid-plus-uniform-scale map taking the rotation-aligned mesh bounding
/// box into [-1, 1)^3.
#[derive(Debug, Clone, Copy)]
pub struct NormalizedFrame {
    /// World-to-aligned rotation (inverse of the body's global orientation).
    pub rotation: Mat3,
    /// Center of the aligned bounding box.
    pub center: Vec3,
    /// Uniform scale, 1 / meters.
    pub scale: f64,
}

impl NormalizedFrame {
    /// Frame from the mesh bounding box after aligning by `global_rotation`
    /// (the body's orientation; points are rotated by its inverse).
    pub fn for_mesh(mesh: &TriMesh, global_rotation: Mat3) -> NormalizedFrame {
        let rotation = global_rotation.transpose();
        let bbox = Aabb::from_points(mesh.vertices.iter().map(|&v| rotation * v));
        let half = 0.5 * bbox.extent().max_component();
        // Slightly shrink so the extreme vertex lands strictly below 1.
        let scale = (1.0 - 8.0 * f64::EPSILON) / half;
        NormalizedFrame {
            rotation,
            center: bbox.center(),
            scale,
        }
    }

    #[inline]
    pub fn apply(&self, x: Vec3) -> Vec3 {
        (self.rotation * x - self.center) * self.scale
    }

    #[inline]
    pub fn apply_inverse(&self, y: Vec3) -> Vec3 {
        self.rotation.transpose() * (y / self.scale + self.center)
    }

    /// Directions rotate only (uniform scale cancels under normalization).
    #[inline]
    pub fn apply_direction(&self, d: Vec3) -> Vec3 {
        self.rotation * d
    }
}

/// Regular scalar lattice, serialized in the SDF3 format: magic "SDF3",
/// three u32 dims, then row-major (x fastest) little-endian f32.
#[derive(Debug, Clone)]
pub struct ScalarVolume {
    pub dims: [u32; 3],
    pub data: Vec<f32>,
}

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad SDF3 file {path}: {message}")]
    Format { path: String, message: String },
}

impl ScalarVolume {
    pub fn write_sdf3(&self, path: impl AsRef<Path>) -> Result<(), VolumeError> {
        let path = path.as_ref();
        let ioerr = |source| VolumeError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(ioerr)?);
        let ioerr = |source| VolumeError::Io {
            path: path.display().to_string(),
            source,
        };
        out.write_all(b"SDF3").map_err(ioerr)?;
        for d in self.dims {
            out.write_all(&d.to_le_bytes()).map_err(ioerr)?;
        }
        for &v in &self.data {
            out.write_all(&v.to_le_bytes()).map_err(ioerr)?;
        }
        Ok(())
    }

    pub fn read_sdf3(path: impl AsRef<Path>) -> Result<Self, VolumeError> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|source| VolumeError::Io {
                path: path.display().to_string(),
                source,
            })?;
        let fmt = |message: String| VolumeError::Format {
            path: path.display().to_string(),
            message,
        };
        if buf.len() < 16 || &buf[0..4] != b"SDF3" {
            return Err(fmt("missing SDF3 magic".to_string()));
        }
        let dims = [
            u32::from_le_bytes(buf[4..8].try_into().unwrap()),
            u32::from_le_bytes(buf[8..12].try_into().unwrap()),
            u32::from_le_bytes(buf[12..16].try_into().unwrap()),
        ];
        let n = dims.iter().map(|&d| d as usize).product::<usize>();
        if buf.len() != 16 + 4 * n {
            return Err(fmt(format!("expected {n} samples")));
        }
        let data = (0..n)
            .map(|i| f32::from_le_bytes(buf[16 + 4 * i..20 + 4 * i].try_into().unwrap()))
            .collect();
        Ok(ScalarVolume { dims, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VoxelGrid;
    use crate::rng::CounterRng;
    use crate::shapes;

    fn sdf_for<'a>(mesh: &'a TriMesh, grid: &'a VoxelGrid) -> SignedDistance<'a> {
        SignedDistance::new(mesh, grid).unwrap()
    }

    #[test]
    fn cube_center_sdf() {
        let cube = shapes::cube(1.0);
        let grid = VoxelGrid::build(&cube, 4).unwrap();
        let sdf = sdf_for(&cube, &grid);
        assert_eq!(sdf.sign_of(Vec3::ZERO), 1);
        assert!((sdf.sdf(Vec3::ZERO) - 0.5).abs() < 1e-12);
        // Outside on +x at 1.5: distance 1.0 to the x = 0.5 wall, negative.
        assert!((sdf.sdf(Vec3::new(1.5, 0.0, 0.0)) + 1.0).abs() < 1e-12);
        assert_eq!(sdf.sign_of(Vec3::new(10.0, 10.0, 10.0)), -1);
    }

    #[test]
    fn non_watertight_rejected() {
        let mut cube = shapes::cube(1.0);
        cube.faces.pop();
        let grid = VoxelGrid::build(&cube, 4).unwrap();
        assert!(matches!(
            SignedDistance::new(&cube, &grid),
            Err(SdfError::NotWatertight)
        ));
    }

    #[test]
    fn sphere_sign_against_analytic() {
        let sphere = shapes::icosphere(3, 1.0);
        let grid = VoxelGrid::build(&sphere, 16).unwrap();
        let sdf = sdf_for(&sphere, &grid);
        let rng = CounterRng::new(17);
        let mut tested = 0;
        for i in 0..3000u64 {
            let p = Vec3::new(
                (rng.uniform(i, 0) - 0.5) * 4.0,
                (rng.uniform(i, 1) - 0.5) * 4.0,
                (rng.uniform(i, 2) - 0.5) * 4.0,
            );
            let analytic = 1.0 - p.norm(); // positive inside
            if analytic.abs() < 2e-2 {
                continue; // triangulation band
            }
            tested += 1;
            assert_eq!(sdf.sign_of(p), analytic.signum() as i32, "at {p:?}");
        }
        assert!(tested > 2000);
    }

    #[test]
    fn sphere_sdf_matches_analytic_within_band() {
        let sphere = shapes::icosphere(3, 1.0);
        let grid = VoxelGrid::build(&sphere, 16).unwrap();
        let sdf = sdf_for(&sphere, &grid);
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    let p = Vec3::new(
                        i as f64 / 7.0 * 3.0 - 1.5,
                        j as f64 / 7.0 * 3.0 - 1.5,
                        k as f64 / 7.0 * 3.0 - 1.5,
                    );
                    let analytic = 1.0 - p.norm();
                    assert!(
                        (sdf.sdf(p) - analytic).abs() <= 2e-2,
                        "sdf({p:?}) = {}, analytic {analytic}",
                        sdf.sdf(p)
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_unit_norm_and_planar_case() {
        // Large flat-ish quad: a big cube, query far above one face.
        let cube = shapes::cube(10.0);
        let grid = VoxelGrid::build(&cube, 8).unwrap();
        let sdf = sdf_for(&cube, &grid);
        let x = Vec3::new(0.0, 0.0, 6.0); // 1 m above the z = +5 wall, outside
        let g = sdf.gradient(x).unwrap();
        // sign = -1 outside; (x - v) points +z; gradient = -z direction.
        assert!((g - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((g.norm() - 1.0).abs() < 1e-9);

        let rng = CounterRng::new(33);
        for i in 0..2000u64 {
            let p = Vec3::new(
                (rng.uniform(i, 0) - 0.5) * 24.0,
                (rng.uniform(i, 1) - 0.5) * 24.0,
                (rng.uniform(i, 2) - 0.5) * 24.0,
            );
            match sdf.gradient(p) {
                Ok(g) => assert!((g.norm() - 1.0).abs() < 1e-9),
                Err(SdfError::OnSurface { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn finite_difference_gradient() {
        let sphere = shapes::icosphere(3, 1.0);
        let grid = VoxelGrid::build(&sphere, 16).unwrap();
        let sdf = sdf_for(&sphere, &grid);
        let h = 1e-4;
        let rng = CounterRng::new(3);
        let mut tested = 0;
        for i in 0..300u64 {
            let p = Vec3::new(
                (rng.uniform(i, 0) - 0.5) * 3.0,
                (rng.uniform(i, 1) - 0.5) * 3.0,
                (rng.uniform(i, 2) - 0.5) * 3.0,
            );
            let cp = sdf.closest_point(p);
            if cp.distance < 10.0 * h {
                continue;
            }
            // Stay away from prism boundaries: gradient is piece-wise
            // constant only inside one face's prism. Require the closest
            // point to sit well inside its face.
            if cp.bary.iter().any(|&b| b < 0.15) {
                continue;
            }
            tested += 1;
            let g = sdf.gradient(p).unwrap();
            let fd = Vec3::new(
                (sdf.sdf(p + Vec3::new(h, 0.0, 0.0)) - sdf.sdf(p - Vec3::new(h, 0.0, 0.0))) / (2.0 * h),
                (sdf.sdf(p + Vec3::new(0.0, h, 0.0)) - sdf.sdf(p - Vec3::new(0.0, h, 0.0))) / (2.0 * h),
                (sdf.sdf(p + Vec3::new(0.0, 0.0, h)) - sdf.sdf(p - Vec3::new(0.0, 0.0, h))) / (2.0 * h),
            );
            assert!(
                (g - fd).norm() < 1e-3,
                "gradient {g:?} vs finite difference {fd:?} at {p:?}"
            );
        }
        assert!(tested > 50);
    }

    #[test]
    fn canonical_identity_and_rotation() {
        let mut posed = shapes::icosphere(2, 1.0);
        let canon = shapes::icosphere(2, 1.0);
        posed.attach_canonical(&canon).unwrap();
        let grid = VoxelGrid::build(&posed, 8).unwrap();
        let sdf = sdf_for(&posed, &grid);
        // Identity rig: canonical point equals the closest point itself.
        let x = Vec3::new(0.3, 0.2, 1.4);
        let e = sdf.embedding(x).unwrap();
        let cp = sdf.closest_point(x);
        assert!((e.canonical_point - cp.point).norm() < 1e-12);
        assert_eq!(e.face, cp.face);

        // Rigidly rotated pose: canonical equals inverse-rotated closest point.
        let rot = Mat3::rotation_axis_angle(Vec3::new(0.3, 1.0, -0.2), 0.9);
        let mut rotated = shapes::transformed(&canon, rot, Vec3::new(0.5, -0.2, 0.1));
        rotated.attach_canonical(&canon).unwrap();
        let grid_r = VoxelGrid::build(&rotated, 8).unwrap();
        let sdf_r = sdf_for(&rotated, &grid_r);
        let xr = rot * x + Vec3::new(0.5, -0.2, 0.1);
        let er = sdf_r.embedding(xr).unwrap();
        let cp_r = sdf_r.closest_point(xr);
        let back = rot.transpose() * (cp_r.point - Vec3::new(0.5, -0.2, 0.1));
        assert!((er.canonical_point - back).norm() < 1e-9);
    }

    #[test]
    fn bary_vertex_maps_to_canonical_vertex() {
        let mut posed = shapes::cube(1.0);
        let canon = shapes::cube(2.0);
        posed.attach_canonical(&canon).unwrap();
        let v = canonical_correspondence(&posed, 0, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, canon.vertices[posed.faces[0][0] as usize]);
    }

    #[test]
    fn embedding_components_match_separate_ops() {
        let mut posed = shapes::deformed_sphere(2, 1.0, 0.15, 5);
        let canon = shapes::icosphere(2, 1.0);
        posed.attach_canonical(&canon).unwrap();
        let grid = VoxelGrid::build(&posed, 10).unwrap();
        let sdf = sdf_for(&posed, &grid);
        let rng = CounterRng::new(2);
        let pts: Vec<Vec3> = (0..200)
            .map(|i| {
                Vec3::new(
                    (rng.uniform(i, 0) - 0.5) * 3.0,
                    (rng.uniform(i, 1) - 0.5) * 3.0,
                    (rng.uniform(i, 2) - 0.5) * 3.0,
                )
            })
            .collect();
        for (e, &p) in sdf.embedding_batch(&pts).iter().zip(&pts) {
            let Ok(e) = e else { continue };
            assert_eq!(e.sdf.to_bits(), sdf.sdf(p).to_bits());
            assert!((e.grad - sdf.gradient(p).unwrap()).norm() < 1e-15);
        }
    }

    #[test]
    fn normalized_frame_basics() {
        // bbox [-2, 2]^3 with identity rotation: scale 1/2, center origin.
        let cube = shapes::cube(4.0);
        let frame = NormalizedFrame::for_mesh(&cube, Mat3::IDENTITY);
        assert!((frame.scale - 0.5).abs() < 1e-12);
        assert!(frame.center.norm() < 1e-12);
        for &v in &cube.vertices {
            let y = frame.apply(v);
            for a in 0..3 {
                assert!((-1.0..1.0).contains(&y.axis(a)), "{y:?} outside [-1,1)");
            }
            let back = frame.apply_inverse(y);
            assert!((back - v).norm() < 1e-12);
        }
    }

    #[test]
    fn normalized_frame_round_trip_rotated() {
        let mesh = shapes::deformed_sphere(2, 1.0, 0.2, 1);
        let rot = Mat3::rotation_axis_angle(Vec3::new(1.0, 0.2, 0.5), 0.7);
        let frame = NormalizedFrame::for_mesh(&mesh, rot);
        for &v in mesh.vertices.iter().step_by(7) {
            let y = frame.apply(v);
            assert!(y.abs().max_component() < 1.0);
            assert!((frame.apply_inverse(y) - v).norm() < 1e-12);
        }
    }

    #[test]
    fn sdf3_round_trip() {
        let vol = ScalarVolume {
            dims: [2, 3, 4],
            data: (0..24).map(|i| i as f32 * 0.5).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.sdf3");
        vol.write_sdf3(&path).unwrap();
        let back = ScalarVolume::read_sdf3(&path).unwrap();
        assert_eq!(back.dims, vol.dims);
        assert_eq!(back.data, vol.data);
    }
}
