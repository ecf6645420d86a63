//! Software depth rasterizer and the DPTH depth-map container.

use crate::camera::Camera;
use crate::math::Vec3;
use crate::mesh::TriMesh;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

/// Sentinel for "no surface" pixels, kept as +inf in memory and written
/// as 0.0 in the DPTH file format.
pub const NO_SURFACE: f64 = f64::INFINITY;

const NEAR_CLIP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DepthMapError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad DPTH file {path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    /// Row-major view-space depths; `NO_SURFACE` where nothing covers.
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub fn empty(width: u32, height: u32) -> Self {
        DepthMap {
            width,
            height,
            depth: vec![NO_SURFACE; (width * height) as usize],
        }
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.depth[(y * self.width + x) as usize]
    }

    /// Bilinear depth lookup at a pixel-space position. Only covered
    /// neighbors contribute; their weights are renormalized. Returns
    /// `NO_SURFACE` when no neighbor is covered or the position is outside.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f64 {
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return NO_SURFACE;
        }
        // Sample positions are pixel centers (x + 0.5, y + 0.5).
        let fu = (u - 0.5).clamp(0.0, self.width as f64 - 1.0);
        let fv = (v - 0.5).clamp(0.0, self.height as f64 - 1.0);
        let x0 = fu.floor() as u32;
        let y0 = fv.floor() as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = fu - x0 as f64;
        let ay = fv - y0 as f64;
        let taps = [
            (self.at(x0, y0), (1.0 - ax) * (1.0 - ay)),
            (self.at(x1, y0), ax * (1.0 - ay)),
            (self.at(x0, y1), (1.0 - ax) * ay),
            (self.at(x1, y1), ax * ay),
        ];
        let mut sum = 0.0;
        let mut wsum = 0.0;
        for (d, w) in taps {
            if d.is_finite() {
                sum += d * w;
                wsum += w;
            }
        }
        if wsum > 0.0 {
            sum / wsum
        } else {
            NO_SURFACE
        }
    }

    /// DPTH format: magic "DPTH", u32 width, u32 height, u32 reserved,
    /// then row-major little-endian f32 with sentinel 0.0.
    pub fn write_dpth(&self, path: impl AsRef<Path>) -> Result<(), DepthMapError> {
        let path = path.as_ref();
        let ioerr = |source| DepthMapError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(ioerr)?);
        let ioerr = |source| DepthMapError::Io {
            path: path.display().to_string(),
            source,
        };
        out.write_all(b"DPTH").map_err(ioerr)?;
        out.write_all(&self.width.to_le_bytes()).map_err(ioerr)?;
        out.write_all(&self.height.to_le_bytes()).map_err(ioerr)?;
        out.write_all(&0u32.to_le_bytes()).map_err(ioerr)?;
        for &d in &self.depth {
            let v = if d.is_finite() { d as f32 } else { 0.0f32 };
            out.write_all(&v.to_le_bytes()).map_err(ioerr)?;
        }
        Ok(())
    }

    pub fn read_dpth(path: impl AsRef<Path>) -> Result<Self, DepthMapError> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|source| DepthMapError::Io {
                path: path.display().to_string(),
                source,
            })?;
        let fmt = |message: String| DepthMapError::Format {
            path: path.display().to_string(),
            message,
        };
        if buf.len() < 16 || &buf[0..4] != b"DPTH" {
            return Err(fmt("missing DPTH magic".to_string()));
        }
        let width = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        let height = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        let n = (width as usize) * (height as usize);
        if buf.len() != 16 + 4 * n {
            return Err(fmt(format!("expected {} payload bytes, found {}", 4 * n, buf.len() - 16)));
        }
        let depth = (0..n)
            .map(|i| {
                let off = 16 + 4 * i;
                let v = f32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as f64;
                if v == 0.0 {
                    NO_SURFACE
                } else {
                    v
                }
            })
            .collect();
        Ok(DepthMap {
            width,
            height,
            depth,
        })
    }
}

/// Screen-space triangle prepared for scanning.
struct ScreenTri {
    // (u, v, 1/z) per vertex.
    p: [[f64; 3]; 3],
    min_y: i64,
    max_y: i64,
    min_x: i64,
    max_x: i64,
}

#[inline]
fn edge(a: [f64; 3], b: [f64; 3], px: f64, py: f64) -> f64 {
    (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])
}

/// Tie rule for pixel centers exactly on an edge: a shared edge belongs to
/// the triangle for which it is a "top" or "left" edge, so each boundary
/// pixel is claimed exactly once.
#[inline]
fn top_left(a: [f64; 3], b: [f64; 3]) -> bool {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

/// Clips a camera-space triangle against the near plane (z = NEAR_CLIP).
/// Returns up to 4 vertices.
fn clip_near(tri: [Vec3; 3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let ain = a.z > NEAR_CLIP;
        let bin = b.z > NEAR_CLIP;
        if ain {
            out.push(a);
        }
        if ain != bin {
            let t = (NEAR_CLIP - a.z) / (b.z - a.z);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Rasterizes the mesh into a per-pixel nearest view-space depth map.
/// Z-buffered, perspective-correct (1/z interpolated in screen space),
/// back-face culling off. Parallel over row bands; the min-merge makes the
/// result independent of scheduling.
pub fn rasterize_depth(mesh: &TriMesh, camera: &Camera) -> DepthMap {
    let width = camera.width as i64;
    let height = camera.height as i64;
    let cam_verts: Vec<Vec3> = mesh
        .vertices
        .iter()
        .map(|&v| camera.world_to_camera(v))
        .collect();

    let mut tris: Vec<ScreenTri> = Vec::new();
    for f in &mesh.faces {
        let tri = [
            cam_verts[f[0] as usize],
            cam_verts[f[1] as usize],
            cam_verts[f[2] as usize],
        ];
        let poly = if tri.iter().all(|v| v.z > NEAR_CLIP) {
            tri.to_vec()
        } else {
            clip_near(tri)
        };
        if poly.len() < 3 {
            continue;
        }
        let screen: Vec<[f64; 3]> = poly
            .iter()
            .map(|c| {
                [
                    camera.fx * c.x / c.z + camera.cx,
                    camera.fy * c.y / c.z + camera.cy,
                    1.0 / c.z,
                ]
            })
            .collect();
        for k in 1..screen.len() - 1 {
            let p = [screen[0], screen[k], screen[k + 1]];
            let min_x = p.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let max_x = p.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            let min_y = p.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
            let max_y = p.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
            if max_x < 0.0 || min_x >= width as f64 || max_y < 0.0 || min_y >= height as f64 {
                continue;
            }
            tris.push(ScreenTri {
                p,
                min_x: (min_x.floor() as i64).max(0),
                max_x: (max_x.ceil() as i64).min(width - 1),
                min_y: (min_y.floor() as i64).max(0),
                max_y: (max_y.ceil() as i64).min(height - 1),
            });
        }
    }

    let band = 16usize;
    let bands: Vec<Vec<f64>> = (0..height as usize)
        .step_by(band)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&y0| {
            let y1 = (y0 + band).min(height as usize);
            let mut buf = vec![NO_SURFACE; (y1 - y0) * width as usize];
            for t in &tris {
                if t.max_y < y0 as i64 || t.min_y >= y1 as i64 {
                    continue;
                }
                let [a, b, c] = t.p;
                let area = edge(a, b, c[0], c[1]);
                if area == 0.0 {
                    continue;
                }
                // Orientation-normalize so inside tests read the same for
                // either winding (no back-face culling).
                let (a, b, c) = if area > 0.0 { (a, b, c) } else { (a, c, b) };
                let area = area.abs();
                for y in t.min_y.max(y0 as i64)..=t.max_y.min(y1 as i64 - 1) {
                    let py = y as f64 + 0.5;
                    for x in t.min_x..=t.max_x {
                        let px = x as f64 + 0.5;
                        let e0 = edge(b, c, px, py);
                        let e1 = edge(c, a, px, py);
                        let e2 = edge(a, b, px, py);
                        let inside = (e0 > 0.0 || (e0 == 0.0 && top_left(b, c)))
                            && (e1 > 0.0 || (e1 == 0.0 && top_left(c, a)))
                            && (e2 > 0.0 || (e2 == 0.0 && top_left(a, b)));
                        if !inside {
                            continue;
                        }
                        let inv_z = (e0 * a[2] + e1 * b[2] + e2 * c[2]) / area;
                        if inv_z <= 0.0 {
                            continue;
                        }
                        let z = 1.0 / inv_z;
                        let idx = (y as usize - y0) * width as usize + x as usize;
                        if z < buf[idx] {
                            buf[idx] = z;
                        }
                    }
                }
            }
            buf
        })
        .collect();

    let mut depth = Vec::with_capacity((width * height) as usize);
    for b in bands {
        depth.extend(b);
    }
    DepthMap {
        width: camera.width,
        height: camera.height,
        depth,
    }
}
