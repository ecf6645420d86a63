//! Screen-space occlusion priors and occlusion-aware attention blending
//! of per-view observations, including the always-visible virtual view.

use crate::camera::Camera;
use crate::raster::DepthMap;
use crate::field::FeatureProvider;
use crate::math::Vec3;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlendError {
    #[error("view {index} has key width {got}, query expects {expected}")]
    WidthMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("cannot blend an empty view list")]
    EmptyViews,
    #[error("failed to read image {path}: {message}")]
    Io { path: String, message: String },
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Visibility of `x` in one view: sigmoid(k * (z_ref - z)) where z is x's
/// view-space depth and z_ref the rasterized body depth at its projected
/// pixel. A sentinel depth means nothing occludes (e -> 1); a projection
/// outside the image (or behind the camera) returns 0 by convention.
pub fn occlusion_prior(x: Vec3, camera: &Camera, depth: &DepthMap, sharpness: f64) -> f64 {
    let Some((u, v, z)) = camera.project(x) else {
        return 0.0;
    };
    if !camera.in_image(u, v) {
        return 0.0;
    }
    let z_ref = depth.sample_bilinear(u, v);
    if z_ref.is_infinite() {
        return 1.0; // no surface at this pixel: fully visible
    }
    sigmoid(sharpness * (z_ref - z))
}

/// Identical mechanics to [`occlusion_prior`] with a ground-truth scan
/// depth map; used as the supervision target.
pub fn gt_occlusion_target(x: Vec3, camera: &Camera, gt_depth: &DepthMap, sharpness: f64) -> f64 {
    occlusion_prior(x, camera, gt_depth, sharpness)
}

/// One of the N+1 observations entering the blend.
#[derive(Debug, Clone)]
pub struct ViewObservation {
    pub color: [f64; 3],
    /// Visibility in [0, 1].
    pub visibility: f64,
    pub key: Vec<f64>,
    pub direction: Vec3,
}

#[derive(Debug, Clone)]
pub struct BlendQuery {
    pub feature: Vec<f64>,
    pub direction: Vec3,
}

/// How visibility gates the attention logits. The scaled dot product
/// (Q.K_i)/sqrt(d_k) is multiplied by o_i by default; the log-domain
/// alternative adds ln(o_i), which sends fully occluded views to weight 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VisibilityMode {
    #[default]
    MultiplyLogits,
    LogDomain,
}

/// Softmax attention over the views. Weights sum to 1; the output is the
/// weighted color. Summation orders are canonicalized by value, so the
/// result is bit-identical under any permutation of the views.
pub fn attention_blend(
    query: &BlendQuery,
    views: &[ViewObservation],
    mode: VisibilityMode,
) -> Result<[f64; 3], BlendError> {
    if views.is_empty() {
        return Err(BlendError::EmptyViews);
    }
    let d_k = query.feature.len();
    for (index, v) in views.iter().enumerate() {
        if v.key.len() != d_k {
            return Err(BlendError::WidthMismatch {
                index,
                got: v.key.len(),
                expected: d_k,
            });
        }
    }
    let scale = 1.0 / (d_k.max(1) as f64).sqrt();
    let logits: Vec<f64> = views
        .iter()
        .map(|v| {
            let dot: f64 = query.feature.iter().zip(&v.key).map(|(q, k)| q * k).sum();
            match mode {
                VisibilityMode::MultiplyLogits => dot * scale * v.visibility,
                VisibilityMode::LogDomain => dot * scale + v.visibility.ln(),
            }
        })
        .collect();
    let max_logit = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // exp terms and weighted colors, summed in value order so the result
    // does not depend on view order.
    let mut terms: Vec<(f64, [f64; 3])> = logits
        .iter()
        .zip(views)
        .map(|(&l, v)| ((l - max_logit).exp(), v.color))
        .collect();
    terms.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| {
            a.1.iter()
                .map(|c| c.to_bits())
                .cmp(b.1.iter().map(|c| c.to_bits()))
        })
    });
    let denom: f64 = terms.iter().map(|t| t.0).sum();
    let mut out = [0.0; 3];
    for ch in 0..3 {
        out[ch] = terms.iter().map(|t| t.0 * t.1[ch]).sum::<f64>() / denom;
    }
    Ok(out)
}

/// RGB float image in [0,1], with bilinear sampling at pixel centers.
#[derive(Debug, Clone)]
pub struct ColorImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[f64; 3]>,
}

impl ColorImage {
    pub fn new(width: u32, height: u32, data: Vec<[f64; 3]>) -> ColorImage {
        assert_eq!(data.len(), (width * height) as usize);
        ColorImage { width, height, data }
    }

    pub fn constant(width: u32, height: u32, c: [f64; 3]) -> ColorImage {
        ColorImage::new(width, height, vec![c; (width * height) as usize])
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<ColorImage, BlendError> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| BlendError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
            .to_rgb8();
        let data = img
            .pixels()
            .map(|p| [0, 1, 2].map(|c| p.0[c] as f64 / 255.0))
            .collect();
        Ok(ColorImage::new(img.width(), img.height(), data))
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> [f64; 3] {
        self.data[(y * self.width + x) as usize]
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// half-integers); clamped at the border.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> [f64; 3] {
        let fx = (u - 0.5).clamp(0.0, self.width as f64 - 1.0);
        let fy = (v - 0.5).clamp(0.0, self.height as f64 - 1.0);
        let (x0, y0) = (fx.floor() as u32, fy.floor() as u32);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let mut out = [0.0; 3];
        for ch in 0..3 {
            let top = self.at(x0, y0)[ch] * (1.0 - tx) + self.at(x1, y0)[ch] * tx;
            let bot = self.at(x0, y1)[ch] * (1.0 - tx) + self.at(x1, y1)[ch] * tx;
            out[ch] = top * (1.0 - ty) + bot * ty;
        }
        out
    }
}

/// One real source view: its camera, image, and rasterized body depth.
pub struct SourceView {
    pub camera: Camera,
    pub image: ColorImage,
    pub depth: DepthMap,
}

/// Builds the N+1 observations and the query for one field sample: per
/// real view, color sampled from the source image at x's projection and
/// visibility from the occlusion prior; plus the virtual view carrying
/// the field's own radiance c0 at visibility 1 along the query direction.
/// Views whose projection falls outside the image get visibility 0 and
/// black color.
pub fn assemble_views(
    x: Vec3,
    d: Vec3,
    sources: &[SourceView],
    c0: [f64; 3],
    provider: &FeatureProvider,
    sharpness: f64,
) -> (BlendQuery, Vec<ViewObservation>) {
    let mut colors = Vec::with_capacity(sources.len());
    let mut visibilities = Vec::with_capacity(sources.len());
    let mut directions = Vec::with_capacity(sources.len());
    for s in sources {
        let (color, vis) = match s.camera.project(x) {
            Some((u, v, _)) if s.camera.in_image(u, v) => (
                s.image.sample_bilinear(u, v),
                occlusion_prior(x, &s.camera, &s.depth, sharpness),
            ),
            _ => ([0.0; 3], 0.0),
        };
        colors.push(color);
        visibilities.push(vis);
        directions.push(s.camera.direction_to(x));
    }
    // Per-view context is the observed color; the query pools those by
    // visibility.
    let contexts: Vec<Vec<f64>> = colors.iter().map(|c| c.to_vec()).collect();
    let pooled = FeatureProvider::pooled(&contexts, &visibilities);
    let mut views: Vec<ViewObservation> = colors
        .iter()
        .zip(&visibilities)
        .zip(&directions)
        .zip(&contexts)
        .map(|(((&color, &visibility), &direction), ctx)| ViewObservation {
            color,
            visibility,
            key: provider.feature(x, direction, ctx),
            direction,
        })
        .collect();
    views.push(ViewObservation {
        color: c0,
        visibility: 1.0,
        key: provider.feature(x, d, &pooled),
        direction: d,
    });
    let query = BlendQuery {
        feature: provider.feature(x, d, &pooled),
        direction: d,
    };
    (query, views)
}
