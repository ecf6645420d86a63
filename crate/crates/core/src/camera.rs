//! Pinhole camera: intrinsics, rigid extrinsics, projection, ray generation.

use crate::math::{Mat3, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("rotation is not orthonormal with det +1 (error {0:.3e})")]
    BadRotation(f64),
    #[error("invalid intrinsics: {0}")]
    BadIntrinsics(String),
}

#[derive(Debug, Clone)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World-to-camera rotation.
    pub rotation: Mat3,
    /// World-to-camera translation (meters).
    pub translation: Vec3,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Mat3,
        translation: Vec3,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        let ortho = rotation.orthonormality_error().max((rotation.det() - 1.0).abs());
        if ortho > 1e-6 {
            return Err(CameraError::BadRotation(ortho));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(CameraError::BadIntrinsics(format!("fx={fx}, fy={fy} must be > 0")));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(CameraError::BadIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Camera {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            width,
            height,
        })
    }

    /// A camera at `eye` looking at `target`, `up` roughly up.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        fx: f64,
        fy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        let fwd = (target - eye).normalized(); // camera +z
        let right = fwd.cross(up).normalized(); // camera +x
        let down = fwd.cross(right); // camera +y (image y grows downward)
        let rotation = Mat3::from_rows(
            [right.x, right.y, right.z],
            [down.x, down.y, down.z],
            [fwd.x, fwd.y, fwd.z],
        );
        let translation = -(rotation * eye);
        Camera::new(
            fx,
            fy,
            width as f64 * 0.5,
            height as f64 * 0.5,
            rotation,
            translation,
            width,
            height,
        )
    }

    #[inline]
    pub fn world_to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// Projects a world point to pixel coordinates and view depth.
    /// None when the point is at or behind the camera plane.
    #[inline]
    pub fn project(&self, p: Vec3) -> Option<(f64, f64, f64)> {
        let c = self.world_to_camera(p);
        if c.z <= 1e-12 {
            return None;
        }
        Some((self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy, c.z))
    }

    #[inline]
    pub fn in_image(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }

    /// Ray through a pixel position (pixel units, (0,0) = top-left corner),
    /// returned as (origin, unit direction) in world space.
    #[inline]
    pub fn pixel_ray(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        let dir_cam = Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let dir = (self.rotation.transpose() * dir_cam).normalized();
        (self.center(), dir)
    }

    /// View direction from the camera center toward a world point.
    pub fn direction_to(&self, p: Vec3) -> Vec3 {
        (p - self.center()).normalized()
    }
}
