//! Quadrature ray integration and image assembly over a radiance field.
//!
//! Per-sample opacity alpha_i = 1 - exp(-sigma_i * delta_i) with
//! delta_i = t_{i+1} - t_i and the last delta reaching t_far; transmittance
//! is the running product of (1 - alpha). Output colors are premultiplied
//! by alpha: the background is transparent and compositing over white
//! happens only at PNG export.

use crate::camera::Camera;
use crate::field::{FieldSample, RadianceField};
use crate::math::{Aabb, Vec3};
use crate::rng::CounterRng;
use crate::sampling::{self, VisualHull};
use rayon::prelude::*;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("sample depths must be strictly increasing (t[{index}] = {t} after {prev})")]
    NonMonotoneDepths { index: usize, t: f64, prev: f64 },
    #[error("t_far {t_far} does not exceed the last sample depth {last}")]
    BadFarBound { t_far: f64, last: f64 },
    #[error("failed to write image {path}: {message}")]
    Io { path: String, message: String },
}

/// Role of one ray sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFlag {
    Valid,
    /// Outside the visual hull: contributes zero density and radiance.
    OutsideHull,
    /// Free-space regularization point; never contributes to rendering.
    FreeSpaceRegularizer,
}

/// One quadrature node: depth along the ray, hull flag, and the field
/// evaluation at that point.
#[derive(Debug, Clone, Copy)]
pub struct RaySample {
    pub t: f64,
    pub flag: SampleFlag,
    pub sigma: f64,
    pub radiance: [f64; 3],
}

/// Integration result for one ray. `color` is premultiplied by `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayColor {
    pub color: [f64; 3],
    pub alpha: f64,
    /// Opacity-weighted mean depth; 0 when the ray is fully transparent.
    pub expected_depth: f64,
    /// Transmittance left after the last sample; alpha + this = 1.
    pub transmittance: f64,
}

impl RayColor {
    pub fn transparent() -> RayColor {
        RayColor {
            color: [0.0; 3],
            alpha: 0.0,
            expected_depth: 0.0,
            transmittance: 1.0,
        }
    }
}

/// Occupancy probability of a density value.
#[inline]
pub fn occupancy(sigma: f64) -> f64 {
    sigma.tanh()
}

/// Quadrature over strictly increasing depths. Non-Valid samples are
/// forced to zero density and radiance; densities are clamped to >= 0 and
/// radiance to [0, 1] so the energy bound color <= alpha <= 1 holds for
/// any input field.
pub fn integrate_ray(samples: &[RaySample], t_far: f64) -> Result<RayColor, RenderError> {
    for (i, w) in samples.windows(2).enumerate() {
        if w[1].t <= w[0].t {
            return Err(RenderError::NonMonotoneDepths {
                index: i + 1,
                t: w[1].t,
                prev: w[0].t,
            });
        }
    }
    let Some(last) = samples.last() else {
        return Ok(RayColor::transparent());
    };
    if t_far < last.t {
        return Err(RenderError::BadFarBound { t_far, last: last.t });
    }

    let mut transmittance = 1.0;
    let mut color = [0.0; 3];
    let mut alpha = 0.0;
    let mut depth = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let delta = match samples.get(i + 1) {
            Some(next) => next.t - s.t,
            None => t_far - s.t,
        };
        let (sigma, radiance) = if s.flag == SampleFlag::Valid {
            (s.sigma.max(0.0), s.radiance.map(|c| c.clamp(0.0, 1.0)))
        } else {
            (0.0, [0.0; 3])
        };
        let a = 1.0 - (-sigma * delta).exp();
        let w = transmittance * a;
        for ch in 0..3 {
            color[ch] += w * radiance[ch];
        }
        alpha += w;
        depth += w * s.t;
        transmittance *= 1.0 - a;
    }
    Ok(RayColor {
        color,
        alpha,
        expected_depth: if alpha > 0.0 { depth / alpha } else { 0.0 },
        transmittance,
    })
}

/// Optional per-sample color override (the occlusion-aware blend stage):
/// given the sample position, view direction, and raw field sample,
/// returns the color to composite instead of the field radiance.
pub trait BlendStage: Sync {
    fn blend(&self, x: Vec3, dir: Vec3, sample: &FieldSample) -> [f64; 3];
}

#[derive(Debug, Clone)]
pub struct RenderConfig {
    /// Quadrature nodes per ray.
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            n_samples: 256,
            seed: 0,
        }
    }
}

/// Premultiplied-alpha float image stack produced by [`render_image`].
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[f64; 3]>,
    pub alpha: Vec<f64>,
    pub expected_depth: Vec<f64>,
}

impl RenderOutput {
    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    /// 8-bit RGBA with straight (un-premultiplied) color.
    pub fn to_rgba8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.color.len() * 4);
        for (c, &a) in self.color.iter().zip(&self.alpha) {
            for ch in 0..3 {
                let straight = if a > 0.0 { c[ch] / a } else { 0.0 };
                out.push((straight.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
            out.push((a.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
        out
    }

    /// 8-bit RGB composited over a white background.
    pub fn to_rgb8_over_white(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.color.len() * 3);
        for (c, &a) in self.color.iter().zip(&self.alpha) {
            for ch in 0..3 {
                let v = c[ch] + (1.0 - a);
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn save_rgba_png(&self, path: impl AsRef<Path>) -> Result<(), RenderError> {
        let path = path.as_ref();
        image::RgbaImage::from_raw(self.width, self.height, self.to_rgba8())
            .expect("buffer sized to dimensions")
            .save(path)
            .map_err(|e| RenderError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    }
}

/// Renders the field through the camera: per pixel, a hull-bounded
/// stratified set of depths, field evaluation, and quadrature. Rays whose
/// bounds miss the padded scene box are transparent background.
/// Deterministic for a fixed seed under any thread count.
pub fn render_image(
    camera: &Camera,
    field: &dyn RadianceField,
    scene_bbox: &Aabb,
    hull: Option<&VisualHull>,
    blend: Option<&dyn BlendStage>,
    cfg: &RenderConfig,
) -> RenderOutput {
    let (w, h) = (camera.width, camera.height);
    let rng = CounterRng::new(cfg.seed);
    let pixels: Vec<RayColor> = (0..(w as u64 * h as u64))
        .into_par_iter()
        .map(|idx| {
            let (px, py) = ((idx % w as u64) as f64, (idx / w as u64) as f64);
            let (o, d) = camera.pixel_ray(px + 0.5, py + 0.5);
            let Some((t0, t1)) = sampling::ray_bounds(scene_bbox, o, d) else {
                return RayColor::transparent();
            };
            let ts = sampling::stratified_samples(t0, t1, cfg.n_samples, &rng, idx);
            let samples: Vec<RaySample> = ts
                .iter()
                .map(|&t| {
                    let x = o + d * t;
                    let inside = hull.map_or(true, |hl| hl.contains(x));
                    if !inside {
                        return RaySample {
                            t,
                            flag: SampleFlag::OutsideHull,
                            sigma: 0.0,
                            radiance: [0.0; 3],
                        };
                    }
                    let s = field.sample(x, d);
                    let radiance = match blend {
                        Some(b) if s.sigma > 0.0 => b.blend(x, d, &s),
                        _ => s.radiance,
                    };
                    RaySample {
                        t,
                        flag: SampleFlag::Valid,
                        sigma: s.sigma,
                        radiance,
                    }
                })
                .collect();
            integrate_ray(&samples, t1).expect("stratified depths are monotone")
        })
        .collect();
    RenderOutput {
        width: w,
        height: h,
        color: pixels.iter().map(|p| p.color).collect(),
        alpha: pixels.iter().map(|p| p.alpha).collect(),
        expected_depth: pixels.iter().map(|p| p.expected_depth).collect(),
    }
}
