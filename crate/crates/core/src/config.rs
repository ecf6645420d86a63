//! Scene configuration: a single JSON document describing the mesh,
//! cameras, field, sampler, blend, and output settings consumed by the
//! command-line tool. Validation applies defaults and collects every
//! problem (with its field path) instead of stopping at the first.

use crate::camera::Camera;
use crate::math::Vec3;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config is not valid JSON: {0}")]
    Parse(String),
    #[error("config invalid:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraConfig {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    pub fx: f64,
    pub fy: f64,
    pub width: u32,
    pub height: u32,
    /// Reference RGB image for this view (PNG), if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    /// Foreground silhouette mask (PNG), if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    /// Precomputed depth map (DPTH), if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
}

impl CameraConfig {
    pub fn build(&self) -> Result<Camera, crate::camera::CameraError> {
        Camera::look_at(
            Vec3::from_array(self.eye),
            Vec3::from_array(self.target),
            Vec3::from_array(self.up),
            self.fx,
            self.fy,
            self.width,
            self.height,
        )
    }
}

pub const FIELD_NAMES: [&str; 4] = ["uniform_ball", "gaussian_blob", "mesh_shell", "mesh_solid"];

fn default_field_sigma() -> f64 {
    4.0
}
fn default_field_color() -> [f64; 3] {
    [0.8, 0.8, 0.8]
}
fn default_field_radius() -> f64 {
    1.0
}
fn default_field_band() -> f64 {
    0.05
}

/// Which analytic or mesh-backed density field to render.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldConfig {
    /// One of [`FIELD_NAMES`].
    pub name: String,
    #[serde(default)]
    pub center: [f64; 3],
    #[serde(default = "default_field_radius")]
    pub radius: f64,
    /// Shell half-width for `mesh_shell`, spread for `gaussian_blob`.
    #[serde(default = "default_field_band")]
    pub band: f64,
    #[serde(default = "default_field_sigma")]
    pub sigma: f64,
    #[serde(default = "default_field_color")]
    pub color: [f64; 3],
}

fn default_n_samples() -> usize {
    256
}
fn default_padding() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Samples per ray.
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Mask dilation radius in pixels. Default: 2% of the image diagonal,
    /// resolved per camera at use time and left unset in the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dilation_radius: Option<u32>,
    /// Scene-box padding as a fraction of its diagonal.
    #[serde(default = "default_padding")]
    pub padding: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_samples: default_n_samples(),
            seed: 0,
            dilation_radius: None,
            padding: default_padding(),
        }
    }
}

impl SamplerConfig {
    /// Dilation radius for a given image size: explicit value, or 2% of
    /// the image diagonal rounded to the nearest pixel.
    pub fn dilation_for(&self, width: u32, height: u32) -> u32 {
        self.dilation_radius.unwrap_or_else(|| {
            let diag = ((width as f64).powi(2) + (height as f64).powi(2)).sqrt();
            (0.02 * diag).round() as u32
        })
    }
}

fn default_sharpness() -> f64 {
    50.0
}
fn default_d_k() -> usize {
    16
}
fn default_mode() -> String {
    "multiply".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlendConfig {
    /// Occlusion sigmoid sharpness k.
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
    /// Attention key width.
    #[serde(default = "default_d_k")]
    pub d_k: usize,
    /// Visibility gating: "multiply" or "log".
    #[serde(default = "default_mode")]
    pub mode: String,
}

impl Default for BlendConfig {
    fn default() -> Self {
        BlendConfig {
            sharpness: default_sharpness(),
            d_k: default_d_k(),
            mode: default_mode(),
        }
    }
}

impl BlendConfig {
    pub fn visibility_mode(&self) -> crate::occlusion::VisibilityMode {
        match self.mode.as_str() {
            "log" => crate::occlusion::VisibilityMode::LogDomain,
            _ => crate::occlusion::VisibilityMode::MultiplyLogits,
        }
    }
}

fn default_resolution() -> u32 {
    64
}
fn default_formats() -> Vec<String> {
    vec!["png".to_string()]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Lattice resolution for volume exports and isosurface extraction.
    #[serde(default = "default_resolution")]
    pub resolution: u32,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            resolution: default_resolution(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConfig {
    pub mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_mesh: Option<PathBuf>,
    pub cameras: Vec<CameraConfig>,
    pub field: FieldConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub blend: BlendConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl SceneConfig {
    /// Parses and validates a config file. Defaults are filled by serde;
    /// all validation errors are collected and reported together.
    pub fn load(path: &Path) -> Result<SceneConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let config: SceneConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        // Relative paths resolve against the config file's directory.
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let config = config.resolved_against(base);
        config.validate()?;
        Ok(config)
    }

    fn resolved_against(mut self, base: &Path) -> SceneConfig {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.mesh);
        if let Some(p) = &mut self.canonical_mesh {
            resolve(p);
        }
        for cam in &mut self.cameras {
            for p in [&mut cam.image, &mut cam.mask, &mut cam.depth].into_iter().flatten() {
                resolve(p);
            }
        }
        self
    }

    /// Checks every invariant, returning the full list of problems.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let check_file = |errors: &mut Vec<String>, field: &str, p: &Path| {
            if !p.is_file() {
                errors.push(format!("{field}: file not found: {}", p.display()));
            }
        };
        let needs_mesh = matches!(self.field.name.as_str(), "mesh_shell" | "mesh_solid");
        if needs_mesh || self.mesh.as_os_str() != "" {
            check_file(&mut errors, "mesh", &self.mesh);
        }
        if let Some(p) = &self.canonical_mesh {
            check_file(&mut errors, "canonical_mesh", p);
        }
        if self.cameras.is_empty() {
            errors.push("cameras: at least one camera is required".to_string());
        }
        for (i, cam) in self.cameras.iter().enumerate() {
            if cam.fx <= 0.0 || cam.fy <= 0.0 {
                errors.push(format!("cameras[{i}].fx/fy: focal lengths must be positive"));
            }
            if cam.width == 0 || cam.height == 0 {
                errors.push(format!("cameras[{i}].width/height: image size must be nonzero"));
            }
            if cam.build().is_err() {
                errors.push(format!(
                    "cameras[{i}]: eye, target, and up are degenerate (coincident or parallel)"
                ));
            }
            for (name, p) in [("image", &cam.image), ("mask", &cam.mask), ("depth", &cam.depth)] {
                if let Some(p) = p {
                    check_file(&mut errors, &format!("cameras[{i}].{name}"), p);
                }
            }
        }
        if !FIELD_NAMES.contains(&self.field.name.as_str()) {
            errors.push(format!(
                "field.name: unknown field {:?} (expected one of {:?})",
                self.field.name, FIELD_NAMES
            ));
        }
        if self.field.sigma < 0.0 {
            errors.push("field.sigma: density must be nonnegative".to_string());
        }
        if self.sampler.n_samples < 2 {
            errors.push("sampler.n_samples: at least 2 samples per ray".to_string());
        }
        if !(self.sampler.padding >= 0.0) {
            errors.push("sampler.padding: must be nonnegative".to_string());
        }
        if self.blend.sharpness <= 0.0 {
            errors.push("blend.sharpness: must be positive".to_string());
        }
        if self.blend.d_k == 0 {
            errors.push("blend.d_k: key width must be nonzero".to_string());
        }
        if !matches!(self.blend.mode.as_str(), "multiply" | "log") {
            errors.push(format!(
                "blend.mode: expected \"multiply\" or \"log\", got {:?}",
                self.blend.mode
            ));
        }
        if self.output.resolution < 2 {
            errors.push("output.resolution: lattice needs at least 2 samples per axis".to_string());
        }
        for f in &self.output.formats {
            if !matches!(f.as_str(), "png" | "dpth" | "sdf3" | "obj" | "json") {
                errors.push(format!("output.formats: unsupported format {f:?}"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    /// Serializes with all defaults materialized, so load(emit(c)) is a
    /// fixed point.
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
