//! Visual-hull tests and ray-sample placement.
//!
//! A point is inside the visual hull when every camera projects it into the
//! (dilated) foreground of that camera's mask. Rays are sampled only on the
//! interval where they cross the padded scene bounding box, stratified so
//! each of the N sub-intervals contributes exactly one sample.

use crate::camera::Camera;
use crate::math::{Aabb, Vec3};
use crate::rng::CounterRng;
use std::path::Path;
use thiserror::Error;

/// Rays never start closer than this to the camera center.
pub const MIN_RAY_T: f64 = 1e-6;
/// Padding applied to the scene bounding box, as a fraction of its diagonal.
pub const DEFAULT_BBOX_PADDING: f64 = 0.05;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("failed to read mask {path}: {message}")]
    Io { path: String, message: String },
    #[error("mask is {got:?} but the camera expects {expected:?} pixels")]
    SizeMismatch { got: (u32, u32), expected: (u32, u32) },
}

/// Binary foreground mask. Loaded from 8-bit PNG: values >= 128 are
/// foreground.
#[derive(Debug, Clone)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Mask {
        assert_eq!(data.len(), (width * height) as usize);
        Mask { width, height, data }
    }

    pub fn full(width: u32, height: u32, value: bool) -> Mask {
        Mask::new(width, height, vec![value; (width * height) as usize])
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Mask, MaskError> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| MaskError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
            .to_luma8();
        let (width, height) = (img.width(), img.height());
        let data = img.pixels().map(|p| p.0[0] >= 128).collect();
        Ok(Mask { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    /// Foreground test at continuous pixel coordinates; outside the image
    /// is background.
    #[inline]
    pub fn foreground_at(&self, u: f64, v: f64) -> bool {
        if u < 0.0 || v < 0.0 {
            return false;
        }
        let (x, y) = (u.floor() as u32, v.floor() as u32);
        x < self.width && y < self.height && self.get(x, y)
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Morphological dilation by a disk: pixel (x, y) becomes foreground if
    /// any source pixel within Euclidean distance `radius` is foreground.
    pub fn dilate(&self, radius: u32) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as i64;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    offsets.push((dx, dy));
                }
            }
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let mut out = vec![false; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                if !self.data[(y * w + x) as usize] {
                    continue;
                }
                for &(dx, dy) in &offsets {
                    let (nx, ny) = (x + dx, y + dy);
                    if (0..w).contains(&nx) && (0..h).contains(&ny) {
                        out[(ny * w + nx) as usize] = true;
                    }
                }
            }
        }
        Mask::new(self.width, self.height, out)
    }
}

/// One camera with its dilated foreground mask.
pub struct HullView {
    pub camera: Camera,
    pub mask: Mask,
}

/// Intersection of per-view silhouette cones.
pub struct VisualHull {
    pub views: Vec<HullView>,
}

impl VisualHull {
    pub fn new(views: Vec<HullView>) -> Result<VisualHull, MaskError> {
        for v in &views {
            if (v.mask.width, v.mask.height) != (v.camera.width, v.camera.height) {
                return Err(MaskError::SizeMismatch {
                    got: (v.mask.width, v.mask.height),
                    expected: (v.camera.width, v.camera.height),
                });
            }
        }
        Ok(VisualHull { views })
    }

    /// True only if every view projects `p` into its foreground. A point
    /// behind a camera or outside its image is outside the hull.
    pub fn contains(&self, p: Vec3) -> bool {
        self.views.iter().all(|v| match v.camera.project(p) {
            Some((u, vv, _z)) => v.mask.foreground_at(u, vv),
            None => false,
        })
    }
}

/// Entry/exit parameters of a ray against the padded scene box, or None
/// when the ray misses it entirely.
pub fn ray_bounds(scene_bbox: &Aabb, o: Vec3, d: Vec3) -> Option<(f64, f64)> {
    let padded = scene_bbox.padded(DEFAULT_BBOX_PADDING * scene_bbox.diagonal());
    let (t0, t1) = padded.ray_interval(o, d)?;
    let t_near = t0.max(MIN_RAY_T);
    if t1 <= t_near {
        return None;
    }
    Some((t_near, t1))
}

/// N strictly increasing depths, one uniform draw per sub-interval of
/// [t_near, t_far). Deterministic in (rng, stream) and independent of call
/// order.
pub fn stratified_samples(
    t_near: f64,
    t_far: f64,
    n: usize,
    rng: &CounterRng,
    stream: u64,
) -> Vec<f64> {
    assert!(t_far > t_near && n > 0);
    let step = (t_far - t_near) / n as f64;
    (0..n)
        .map(|i| t_near + (i as f64 + rng.uniform(stream, i as u64)) * step)
        .collect()
}

/// Whether each stratified depth along the ray lies in the visual hull.
pub fn hull_sample_flags(hull: &VisualHull, o: Vec3, d: Vec3, ts: &[f64]) -> Vec<bool> {
    ts.iter().map(|&t| hull.contains(o + d * t)).collect()
}

/// Points drawn uniformly from the padded scene box but *outside* the
/// hull, by rejection. `truncated` is set when the requested count could
/// not be reached within the attempt budget (e.g. the hull covers nearly
/// the whole box).
pub struct FreeSpaceSamples {
    pub points: Vec<Vec3>,
    pub truncated: bool,
}

pub fn sample_free_space(
    hull: &VisualHull,
    scene_bbox: &Aabb,
    count: usize,
    rng: &CounterRng,
    stream: u64,
) -> FreeSpaceSamples {
    let padded = scene_bbox.padded(DEFAULT_BBOX_PADDING * scene_bbox.diagonal());
    let ext = padded.extent();
    let mut points = Vec::with_capacity(count);
    let budget = (count as u64).saturating_mul(100).max(1000);
    let mut attempt = 0u64;
    while points.len() < count && attempt < budget {
        let p = Vec3::new(
            padded.min.x + rng.uniform(stream.wrapping_add(attempt), 0) * ext.x,
            padded.min.y + rng.uniform(stream.wrapping_add(attempt), 1) * ext.y,
            padded.min.z + rng.uniform(stream.wrapping_add(attempt), 2) * ext.z,
        );
        if !hull.contains(p) {
            points.push(p);
        }
        attempt += 1;
    }
    let truncated = points.len() < count;
    FreeSpaceSamples { points, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Camera;
    use crate::shapes;

    fn disk_mask(w: u32, h: u32, cx: f64, cy: f64, r: f64) -> Mask {
        let data = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
                (x - cx).powi(2) + (y - cy).powi(2) <= r * r
            })
            .collect();
        Mask::new(w, h, data)
    }

    #[test]
    fn dilation_disk_radius_two_has_13_pixels() {
        let mut data = vec![false; 49];
        data[3 * 7 + 3] = true;
        let m = Mask::new(7, 7, data).dilate(2);
        assert_eq!(m.count_foreground(), 13);
        assert!(m.get(3, 1) && m.get(1, 3) && m.get(5, 3) && m.get(3, 5));
        assert!(!m.get(1, 1)); // corner of the 5x5 square is outside the disk
    }

    #[test]
    fn dilation_clips_at_border() {
        let mut data = vec![false; 25];
        data[0] = true;
        let m = Mask::new(5, 5, data).dilate(2);
        assert_eq!(m.count_foreground(), 6); // quarter disk
    }

    #[test]
    fn dilation_radius_zero_is_identity() {
        let m = disk_mask(16, 16, 8.0, 8.0, 4.0);
        let d = m.dilate(0);
        assert_eq!(m.count_foreground(), d.count_foreground());
    }

    fn ring_cameras(n: usize, radius: f64, w: u32, h: u32) -> Vec<Camera> {
        (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                let eye = Vec3::new(radius * a.cos(), 0.3, radius * a.sin());
                Camera::look_at(
                    eye,
                    Vec3::ZERO,
                    Vec3::new(0.0, 1.0, 0.0),
                    w as f64,
                    w as f64,
                    w,
                    h,
                )
                .unwrap()
            })
            .collect()
    }

    /// Hull from exact sphere silhouettes rendered analytically.
    fn sphere_hull(n_views: usize, sphere_r: f64) -> VisualHull {
        let (w, h) = (96u32, 96u32);
        let views = ring_cameras(n_views, 4.0, w, h)
            .into_iter()
            .map(|camera| {
                let data = (0..w * h)
                    .map(|i| {
                        let (u, v) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
                        let (o, d) = camera.pixel_ray(u, v);
                        // ray-sphere test against the origin-centered sphere
                        let b = o.dot(d);
                        b * b - o.norm_sq() + sphere_r * sphere_r >= 0.0
                    })
                    .collect();
                HullView {
                    camera,
                    mask: Mask::new(w, h, data),
                }
            })
            .collect();
        VisualHull::new(views).unwrap()
    }

    #[test]
    fn hull_contains_sphere_and_excludes_far_points() {
        let hull = sphere_hull(6, 1.0);
        assert!(hull.contains(Vec3::ZERO));
        assert!(hull.contains(Vec3::new(0.5, 0.3, -0.2)));
        assert!(!hull.contains(Vec3::new(2.5, 0.0, 0.0)));
        assert!(!hull.contains(Vec3::new(0.0, 2.5, 0.0)));
        // Behind every camera.
        assert!(!hull.contains(Vec3::new(50.0, 0.0, 0.0)));
    }

    #[test]
    fn empty_mask_rejects_everything() {
        let mut hull = sphere_hull(3, 1.0);
        hull.views[1].mask = Mask::full(96, 96, false);
        assert!(!hull.contains(Vec3::ZERO));
    }

    #[test]
    fn hull_is_intersection_of_views() {
        // One camera's mask only covers the left half of its image; points
        // that project to the right half must drop out of the hull.
        let hull_full = sphere_hull(4, 1.0);
        let mut hull = sphere_hull(4, 1.0);
        let w = hull.views[0].mask.width;
        let h = hull.views[0].mask.height;
        let data = (0..w * h).map(|i| i % w < w / 2).collect();
        hull.views[0].mask = Mask::new(w, h, data);
        let p = Vec3::new(0.0, 0.0, 0.6);
        let q = Vec3::new(0.0, 0.0, -0.6);
        assert!(hull_full.contains(p) && hull_full.contains(q));
        assert_ne!(hull.contains(p), hull.contains(q));
    }

    #[test]
    fn ray_bounds_slab_and_min_t() {
        let bbox = shapes::cube(2.0).bbox(); // [-1, 1]^3, diagonal 2sqrt(3)
        let pad = 0.05 * bbox.diagonal();
        let o = Vec3::new(0.0, 0.0, -5.0);
        let d = Vec3::new(0.0, 0.0, 1.0);
        let (t0, t1) = ray_bounds(&bbox, o, d).unwrap();
        assert!((t0 - (4.0 - pad)).abs() < 1e-12);
        assert!((t1 - (6.0 + pad)).abs() < 1e-12);
        // Origin inside the box: near clamps to MIN_RAY_T.
        let (t0, _) = ray_bounds(&bbox, Vec3::ZERO, d).unwrap();
        assert_eq!(t0, MIN_RAY_T);
        // Miss.
        assert!(ray_bounds(&bbox, o, Vec3::new(1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn stratified_samples_one_per_interval_and_deterministic() {
        let rng = CounterRng::new(9);
        let ts = stratified_samples(1.0, 3.0, 64, &rng, 7);
        assert_eq!(ts.len(), 64);
        let step = 2.0 / 64.0;
        for (i, &t) in ts.iter().enumerate() {
            let lo = 1.0 + i as f64 * step;
            assert!(t >= lo && t < lo + step, "sample {i} = {t} out of stratum");
        }
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        let again = stratified_samples(1.0, 3.0, 64, &CounterRng::new(9), 7);
        assert_eq!(ts, again);
        let other = stratified_samples(1.0, 3.0, 64, &rng, 8);
        assert_ne!(ts, other);
    }

    #[test]
    fn free_space_sampling_avoids_hull() {
        let hull = sphere_hull(6, 1.0);
        let bbox = shapes::cube(4.0).bbox();
        let rng = CounterRng::new(4);
        let s = sample_free_space(&hull, &bbox, 500, &rng, 0);
        assert_eq!(s.points.len(), 500);
        assert!(!s.truncated);
        for &p in &s.points {
            assert!(!hull.contains(p));
            // Hull over-approximates the sphere, so nothing lands inside it.
            assert!(p.norm() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn free_space_sampling_truncates_when_hull_fills_box() {
        // All-foreground masks: hull = every point in front of all cameras.
        let (w, h) = (16u32, 16u32);
        let views = ring_cameras(4, 4.0, w, h)
            .into_iter()
            .map(|camera| HullView {
                camera,
                mask: Mask::full(w, h, true),
            })
            .collect();
        let hull = VisualHull::new(views).unwrap();
        // A tiny box at the origin is fully inside every frustum.
        let bbox = Aabb::from_points([Vec3::splat(-0.1), Vec3::splat(0.1)]);
        let rng = CounterRng::new(1);
        let s = sample_free_space(&hull, &bbox, 100, &rng, 0);
        assert!(s.truncated);
        assert!(s.points.is_empty());
    }

    #[test]
    fn hull_sample_flags_match_contains() {
        let hull = sphere_hull(5, 1.0);
        let o = Vec3::new(0.0, 0.0, -4.0);
        let d = Vec3::new(0.0, 0.0, 1.0);
        let rng = CounterRng::new(0);
        let ts = stratified_samples(0.5, 7.5, 128, &rng, 0);
        let flags = hull_sample_flags(&hull, o, d, &ts);
        let inside = flags.iter().filter(|&&b| b).count();
        // The ray crosses the unit sphere for t in about [3, 5].
        assert!(inside > 20 && inside < 50, "inside = {inside}");
        for (&t, &f) in ts.iter().zip(&flags) {
            assert_eq!(f, hull.contains(o + d * t));
        }
    }
}
