//! Image and geometry evaluation metrics: PSNR, SSIM, chamfer / normal
//! distance, sampled Hausdorff (UHD), F-score, and the photometric and
//! geometry loss functionals used as offline measurements.

use crate::grid::VoxelGrid;
use crate::math::Vec3;
use crate::mesh::TriMesh;
use crate::occlusion::ColorImage;
use crate::render::occupancy;
use crate::rng::CounterRng;
use crate::sampling::Mask;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// PSNR sentinel for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("images are {got:?} but SSIM needs at least 11x11")]
    TooSmallForWindow { got: (u32, u32) },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("arrays have different lengths: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
}

/// Aggregated metric values; absent metrics stay None in reports.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chamfer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_dist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uhd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fscore: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photometric_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry_loss: Option<f64>,
}

fn check_dims(a: &ColorImage, b: &ColorImage) -> Result<(), MetricError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricError::DimensionMismatch {
            a: (a.width, a.height),
            b: (b.width, b.height),
        });
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over the masked pixels (all pixels
/// when no mask), capped at [`PSNR_CAP_DB`] for identical inputs.
pub fn psnr(image: &ColorImage, reference: &ColorImage, mask: Option<&Mask>) -> Result<f64, MetricError> {
    check_dims(image, reference)?;
    if let Some(m) = mask {
        if (m.width, m.height) != (image.width, image.height) {
            return Err(MetricError::DimensionMismatch {
                a: (m.width, m.height),
                b: (image.width, image.height),
            });
        }
    }
    let mut se = 0.0;
    let mut count = 0usize;
    for y in 0..image.height {
        for x in 0..image.width {
            if let Some(m) = mask {
                if !m.get(x, y) {
                    continue;
                }
            }
            let (a, b) = (image.at(x, y), reference.at(x, y));
            for ch in 0..3 {
                let d = a[ch] - b[ch];
                se += d * d;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricError::EmptyMask);
    }
    let mse = se / (count * 3) as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

fn luma(c: [f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

/// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, on luma grayscale.
pub fn ssim(image: &ColorImage, reference: &ColorImage) -> Result<f64, MetricError> {
    check_dims(image, reference)?;
    let (w, h) = (image.width as i64, image.height as i64);
    if w < 11 || h < 11 {
        return Err(MetricError::TooSmallForWindow {
            got: (image.width, image.height),
        });
    }
    let gray = |im: &ColorImage| -> Vec<f64> { im.data.iter().map(|&c| luma(c)).collect() };
    let (ga, gb) = (gray(image), gray(reference));

    // 11-tap Gaussian, sigma 1.5, normalized.
    let mut kernel = [0.0f64; 11];
    for (i, k) in kernel.iter_mut().enumerate() {
        let d = i as f64 - 5.0;
        *k = (-d * d / (2.0 * 1.5 * 1.5)).exp();
    }
    let s: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= s;
    }

    const C1: f64 = 0.01 * 0.01;
    const C2: f64 = 0.03 * 0.03;
    // Valid windows only (no padding), separable filtering done naively.
    let mut total = 0.0;
    let mut count = 0usize;
    for cy in 5..h - 5 {
        for cx in 5..w - 5 {
            let (mut ma, mut mb) = (0.0, 0.0);
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for dy in -5i64..=5 {
                for dx in -5i64..=5 {
                    let wgt = kernel[(dy + 5) as usize] * kernel[(dx + 5) as usize];
                    let idx = ((cy + dy) * w + cx + dx) as usize;
                    ma += wgt * ga[idx];
                    mb += wgt * gb[idx];
                }
            }
            for dy in -5i64..=5 {
                for dx in -5i64..=5 {
                    let wgt = kernel[(dy + 5) as usize] * kernel[(dx + 5) as usize];
                    let idx = ((cy + dy) * w + cx + dx) as usize;
                    va += wgt * (ga[idx] - ma) * (ga[idx] - ma);
                    vb += wgt * (gb[idx] - mb) * (gb[idx] - mb);
                    cov += wgt * (ga[idx] - ma) * (gb[idx] - mb);
                }
            }
            let l = (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
            let cs = (2.0 * cov + C2) / (va + vb + C2);
            total += l * cs;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// An area-weighted surface sample: position and face normal.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSample {
    pub point: Vec3,
    pub normal: Vec3,
}

/// Default sample count for the mesh metrics.
pub const DEFAULT_SURFACE_SAMPLES: usize = 100_000;

/// Draws `count` points uniformly over the surface: faces chosen by
/// cumulative area, positions by the square-root barycentric trick.
/// Deterministic in (seed, index).
pub fn surface_samples(mesh: &TriMesh, count: usize, seed: u64) -> Vec<SurfaceSample> {
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for fi in 0..mesh.faces.len() {
        total += mesh.face_area(fi);
        cumulative.push(total);
    }
    let rng = CounterRng::new(seed);
    (0..count as u64)
        .map(|i| {
            let target = rng.uniform(i, 0) * total;
            let fi = cumulative.partition_point(|&c| c < target).min(mesh.faces.len() - 1);
            let [a, b, c] = mesh.face_vertices(fi);
            let su = rng.uniform(i, 1).sqrt();
            let v = rng.uniform(i, 2);
            let (wa, wb, wc) = (1.0 - su, su * (1.0 - v), su * v);
            SurfaceSample {
                point: a * wa + b * wb + c * wc,
                normal: mesh.face_normal(fi),
            }
        })
        .collect()
}

struct MeshWithGrid<'a> {
    mesh: &'a TriMesh,
    grid: VoxelGrid,
}

impl<'a> MeshWithGrid<'a> {
    fn new(mesh: &'a TriMesh) -> Result<Self, MetricError> {
        if mesh.faces.is_empty() {
            return Err(MetricError::EmptyMesh);
        }
        let grid = VoxelGrid::build(mesh, 32).expect("fixed resolution is valid");
        Ok(MeshWithGrid { mesh, grid })
    }
}

/// Mean distance and mean (1 - |n.n'|) from samples to the other surface.
fn directed_means(samples: &[SurfaceSample], target: &MeshWithGrid) -> (f64, f64) {
    let (dist_sum, normal_sum) = samples
        .par_iter()
        .map_init(crate::grid::QueryScratch::default, |scratch, s| {
            let cp = target.grid.closest_point_with(target.mesh, s.point, scratch);
            let n = target.mesh.face_normal(cp.face as usize);
            (cp.distance, 1.0 - s.normal.dot(n).abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    (dist_sum / samples.len() as f64, normal_sum / samples.len() as f64)
}

/// Symmetric point-to-surface chamfer distance and chamfer normal
/// distance. Both meshes are sampled with the same seed, so
/// chamfer(A, B) == chamfer(B, A) exactly.
pub fn chamfer(
    mesh_a: &TriMesh,
    mesh_b: &TriMesh,
    samples_per_mesh: usize,
    seed: u64,
) -> Result<(f64, f64), MetricError> {
    let a = MeshWithGrid::new(mesh_a)?;
    let b = MeshWithGrid::new(mesh_b)?;
    let sa = surface_samples(mesh_a, samples_per_mesh, seed);
    let sb = surface_samples(mesh_b, samples_per_mesh, seed);
    let (da, na) = directed_means(&sa, &b);
    let (db, nb) = directed_means(&sb, &a);
    Ok(((da + db) / 2.0, (na + nb) / 2.0))
}

/// Sampled universal Hausdorff distance: the worst sample-to-surface
/// distance over both directions.
pub fn uhd(
    mesh_a: &TriMesh,
    mesh_b: &TriMesh,
    samples_per_mesh: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    let a = MeshWithGrid::new(mesh_a)?;
    let b = MeshWithGrid::new(mesh_b)?;
    let worst = |samples: &[SurfaceSample], target: &MeshWithGrid| -> f64 {
        samples
            .par_iter()
            .map_init(crate::grid::QueryScratch::default, |scratch, s| {
                target.grid.closest_point_with(target.mesh, s.point, scratch).distance
            })
            .reduce(|| 0.0, f64::max)
    };
    let sa = surface_samples(mesh_a, samples_per_mesh, seed);
    let sb = surface_samples(mesh_b, samples_per_mesh, seed);
    Ok(worst(&sa, &b).max(worst(&sb, &a)))
}

/// Harmonic mean of precision (A-samples within `threshold` of B) and
/// recall (B-samples within `threshold` of A).
pub fn fscore(
    mesh_a: &TriMesh,
    mesh_b: &TriMesh,
    threshold: f64,
    samples_per_mesh: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    assert!(threshold > 0.0, "threshold must be positive");
    let a = MeshWithGrid::new(mesh_a)?;
    let b = MeshWithGrid::new(mesh_b)?;
    let frac_within = |samples: &[SurfaceSample], target: &MeshWithGrid| -> f64 {
        let hits = samples
            .par_iter()
            .map_init(crate::grid::QueryScratch::default, |scratch, s| {
                let d = target.grid.closest_point_with(target.mesh, s.point, scratch).distance;
                usize::from(d <= threshold)
            })
            .sum::<usize>();
        hits as f64 / samples.len() as f64
    };
    let precision = frac_within(&surface_samples(mesh_a, samples_per_mesh, seed), &b);
    let recall = frac_within(&surface_samples(mesh_b, samples_per_mesh, seed), &a);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Photometric loss: per-ray squared errors of both the raw radiance c0
/// and the blended color c against the reference, summed and divided by
/// the ray count.
pub fn photometric_loss(
    blended: &[[f64; 3]],
    raw: &[[f64; 3]],
    reference: &[[f64; 3]],
) -> Result<f64, MetricError> {
    if blended.len() != reference.len() || raw.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            a: blended.len().min(raw.len()),
            b: reference.len(),
        });
    }
    let mut total = 0.0;
    for ((c, c0), r) in blended.iter().zip(raw).zip(reference) {
        for ch in 0..3 {
            total += (c0[ch] - r[ch]).powi(2) + (c[ch] - r[ch]).powi(2);
        }
    }
    Ok(total / reference.len() as f64)
}

/// Geometry loss: mean squared occupancy error against inside/outside
/// labels plus mean squared visibility error against occlusion targets.
pub fn geometry_loss(
    sigma: &[f64],
    labels: &[f64],
    visibility: &[f64],
    targets: &[f64],
) -> Result<f64, MetricError> {
    if sigma.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            a: sigma.len(),
            b: labels.len(),
        });
    }
    if visibility.len() != targets.len() {
        return Err(MetricError::LengthMismatch {
            a: visibility.len(),
            b: targets.len(),
        });
    }
    let occ: f64 = sigma
        .iter()
        .zip(labels)
        .map(|(&s, &l)| (occupancy(s) - l).powi(2))
        .sum::<f64>()
        / sigma.len().max(1) as f64;
    let vis: f64 = visibility
        .iter()
        .zip(targets)
        .map(|(&o, &t)| (o - t).powi(2))
        .sum::<f64>()
        / visibility.len().max(1) as f64;
    Ok(occ + vis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Mat3;
    use crate::shapes;

    fn noisy(base: &ColorImage, amplitude: f64, seed: u64) -> ColorImage {
        let rng = CounterRng::new(seed);
        let data = base
            .data
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                [0, 1, 2].map(|ch| {
                    (c[ch] + (rng.uniform(i as u64, ch as u64) - 0.5) * 2.0 * amplitude)
                        .clamp(0.0, 1.0)
                })
            })
            .collect();
        ColorImage::new(base.width, base.height, data)
    }

    fn gradient_image(w: u32, h: u32) -> ColorImage {
        let data = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64 / w as f64, (i / w) as f64 / h as f64);
                [x, y, 0.5 * (x + y)]
            })
            .collect();
        ColorImage::new(w, h, data)
    }

    #[test]
    fn psnr_identical_and_uniform_error() {
        let img = gradient_image(32, 32);
        assert_eq!(psnr(&img, &img, None).unwrap(), PSNR_CAP_DB);
        // Uniform +0.1 on every channel of a mid-gray image: MSE 0.01 -> 20 dB.
        let a = ColorImage::constant(32, 32, [0.4; 3]);
        let b = ColorImage::constant(32, 32, [0.5; 3]);
        let db = psnr(&a, &b, None).unwrap();
        assert!((db - 20.0).abs() < 1e-6, "psnr {db}");
    }

    #[test]
    fn psnr_matches_direct_mse() {
        let a = gradient_image(24, 24);
        let b = noisy(&a, 0.2, 3);
        let db = psnr(&a, &b, None).unwrap();
        let mut se = 0.0;
        for (pa, pb) in a.data.iter().zip(&b.data) {
            for ch in 0..3 {
                se += (pa[ch] - pb[ch]).powi(2);
            }
        }
        let expect = 10.0 * (1.0 / (se / (24.0 * 24.0 * 3.0))).log10();
        assert!((db - expect).abs() < 1e-9);
    }

    #[test]
    fn psnr_monotone_under_noise_ladder() {
        let base = gradient_image(48, 48);
        let mut prev = f64::INFINITY;
        for (i, amp) in [0.01, 0.03, 0.1, 0.3].iter().enumerate() {
            let db = psnr(&noisy(&base, *amp, i as u64), &base, None).unwrap();
            assert!(db < prev, "psnr must fall as noise grows");
            prev = db;
        }
    }

    #[test]
    fn psnr_mask_and_errors() {
        let a = gradient_image(16, 16);
        let b = ColorImage::constant(8, 8, [0.0; 3]);
        assert!(matches!(psnr(&a, &b, None), Err(MetricError::DimensionMismatch { .. })));
        let empty = Mask::full(16, 16, false);
        assert!(matches!(psnr(&a, &a, Some(&empty)), Err(MetricError::EmptyMask)));
        // Mask out the noisy half: PSNR returns to the cap.
        let mut c = a.clone();
        for y in 0..16 {
            for x in 8..16u32 {
                c.data[(y * 16 + x) as usize] = [0.0; 3];
            }
        }
        let left = Mask::new(16, 16, (0..256).map(|i| i % 16 < 8).collect());
        assert_eq!(psnr(&c, &a, Some(&left)).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn ssim_identical_negative_and_constant() {
        let img = gradient_image(32, 32);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);

        // Anticorrelated content around mid-gray: negative SSIM.
        let checker = ColorImage::new(
            32,
            32,
            (0..32 * 32)
                .map(|i| {
                    let v = if (i % 32 + i / 32) % 2 == 0 { 0.8 } else { 0.2 };
                    [v; 3]
                })
                .collect(),
        );
        let inverted = ColorImage::new(
            32,
            32,
            checker.data.iter().map(|c| c.map(|v| 1.0 - v)).collect(),
        );
        assert!(ssim(&checker, &inverted).unwrap() < 0.0);

        // Constant vs constant: luminance term only.
        let (m1, m2) = (0.3, 0.7);
        let got = ssim(
            &ColorImage::constant(16, 16, [m1; 3]),
            &ColorImage::constant(16, 16, [m2; 3]),
        )
        .unwrap();
        let c1 = 0.01f64 * 0.01;
        let expect = (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
        assert!((got - expect).abs() < 1e-12);

        assert!(matches!(
            ssim(&ColorImage::constant(8, 8, [0.0; 3]), &ColorImage::constant(8, 8, [0.0; 3])),
            Err(MetricError::TooSmallForWindow { .. })
        ));
    }

    #[test]
    fn surface_sampling_is_area_weighted() {
        // Two-triangle mesh with a 9:1 area ratio.
        let mesh = TriMesh::new(
            vec![
                Vec3::ZERO,
                Vec3::new(3.0, 0.0, 0.0),
                Vec3::new(0.0, 3.0, 0.0),
                Vec3::new(-1.0, 0.0, 0.0),
                Vec3::new(0.0, -1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 3, 4]],
        )
        .unwrap();
        let samples = surface_samples(&mesh, 20_000, 1);
        let in_small = samples.iter().filter(|s| s.point.x < 0.0 || s.point.y < 0.0).count();
        let frac = in_small as f64 / samples.len() as f64;
        assert!((frac - 0.1).abs() < 0.01, "small-face fraction {frac}");
        // Points lie on a face plane (z = 0) with barycentric inside.
        for s in samples.iter().step_by(97) {
            assert!(s.point.z.abs() < 1e-12);
            assert!((s.normal.norm_sq() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chamfer_self_is_zero_and_symmetric() {
        let sphere = shapes::icosphere(2, 1.0);
        let (c, n) = chamfer(&sphere, &sphere, 5000, 7).unwrap();
        assert!(c < 1e-9 && n < 1e-9, "self chamfer {c}, normal {n}");

        let other = shapes::deformed_sphere(2, 1.0, 0.1, 2);
        let ab = chamfer(&sphere, &other, 5000, 7).unwrap();
        let ba = chamfer(&other, &sphere, 5000, 7).unwrap();
        assert_eq!(ab.0.to_bits(), ba.0.to_bits());
        assert_eq!(ab.1.to_bits(), ba.1.to_bits());
    }

    #[test]
    fn concentric_spheres_chamfer() {
        let a = shapes::icosphere(3, 1.0);
        let b = shapes::icosphere(3, 1.1);
        let (c, n) = chamfer(&a, &b, 20_000, 5).unwrap();
        assert!((c - 0.1).abs() < 2e-2, "chamfer {c}");
        assert!(n < 1e-2, "concentric spheres share normals, got {n}");
    }

    #[test]
    fn uhd_translated_cube_and_dominance() {
        let a = shapes::cube(1.0);
        let b = shapes::translated(&a, Vec3::new(0.3, 0.0, 0.0));
        let h = uhd(&a, &b, 50_000, 2).unwrap();
        assert!(h <= 0.3 + 1e-9 && h > 0.25, "uhd {h}");
        let (c, _) = chamfer(&a, &b, 50_000, 2).unwrap();
        assert!(h >= c);
        assert!(uhd(&a, &a, 1000, 0).unwrap() < 1e-12);
    }

    #[test]
    fn fscore_thresholds() {
        let a = shapes::icosphere(3, 1.0);
        assert_eq!(fscore(&a, &a, 0.01, 5000, 3).unwrap(), 1.0);
        let b = shapes::icosphere(3, 1.05);
        assert_eq!(fscore(&a, &b, 0.1, 5000, 3).unwrap(), 1.0);
        assert!(fscore(&a, &b, 0.01, 5000, 3).unwrap() < 0.05);
        // Monotone in threshold.
        let mut prev = 0.0;
        for tau in [0.01, 0.03, 0.05, 0.1] {
            let f = fscore(&a, &b, tau, 2000, 3).unwrap();
            assert!(f >= prev);
            prev = f;
        }
        // Far-apart meshes.
        let far = shapes::translated(&a, Vec3::new(10.0, 0.0, 0.0));
        assert_eq!(fscore(&a, &far, 0.5, 1000, 0).unwrap(), 0.0);
    }

    #[test]
    fn geometry_metrics_rigid_invariance() {
        let a = shapes::icosphere(2, 1.0);
        let b = shapes::deformed_sphere(2, 1.0, 0.15, 9);
        let rot = Mat3::rotation_axis_angle(Vec3::new(0.2, 1.0, 0.5), 1.1);
        let t = Vec3::new(3.0, -2.0, 1.0);
        let (ar, br) = (shapes::transformed(&a, rot, t), shapes::transformed(&b, rot, t));
        let (c0, n0) = chamfer(&a, &b, 10_000, 4).unwrap();
        let (c1, n1) = chamfer(&ar, &br, 10_000, 4).unwrap();
        assert!((c0 - c1).abs() < 1e-9, "chamfer drift {}", (c0 - c1).abs());
        // The nearest face can flip at region boundaries under rotation, so
        // the normal term is only invariant to sampling noise.
        assert!((n0 - n1).abs() < 1e-4, "normal drift {}", (n0 - n1).abs());
        let h0 = uhd(&a, &b, 10_000, 4).unwrap();
        let h1 = uhd(&ar, &br, 10_000, 4).unwrap();
        assert!((h0 - h1).abs() < 1e-9);
        let f0 = fscore(&a, &b, 0.05, 10_000, 4).unwrap();
        let f1 = fscore(&ar, &br, 0.05, 10_000, 4).unwrap();
        assert!((f0 - f1).abs() < 1e-3);
    }

    #[test]
    fn photometric_loss_cases() {
        let c = vec![[0.5; 3]; 100];
        assert_eq!(photometric_loss(&c, &c, &c).unwrap(), 0.0);
        // Blend perfect, raw radiance uniformly off by 0.1: 3 * 0.01.
        let c0: Vec<[f64; 3]> = c.iter().map(|p| p.map(|v| v + 0.1)).collect();
        let loss = photometric_loss(&c, &c0, &c).unwrap();
        assert!((loss - 0.03).abs() < 1e-12);
        // Oracle re-summation on random data.
        let rng = CounterRng::new(9);
        let mk = |s: u64| -> Vec<[f64; 3]> {
            (0..50)
                .map(|i| [0, 1, 2].map(|ch| rng.uniform(s * 1000 + i, ch as u64)))
                .collect()
        };
        let (x, y, r) = (mk(1), mk(2), mk(3));
        let got = photometric_loss(&x, &y, &r).unwrap();
        let mut expect = 0.0;
        for i in 0..50 {
            for ch in 0..3 {
                expect += (y[i][ch] - r[i][ch]).powi(2) + (x[i][ch] - r[i][ch]).powi(2);
            }
        }
        assert!((got - expect / 50.0).abs() < 1e-12);
        assert!(photometric_loss(&x[..10], &y, &r).is_err());
    }

    #[test]
    fn geometry_loss_cases() {
        // Saturated-correct predictions.
        let sigma = vec![100.0, 100.0, 0.0, 0.0];
        let labels = vec![1.0, 1.0, 0.0, 0.0];
        let o = vec![0.3, 0.9];
        let targets = o.clone();
        let loss = geometry_loss(&sigma, &labels, &o, &targets).unwrap();
        assert!(loss < 1e-12);
        // All-zero predictions vs all-one labels: first term 1.
        let loss = geometry_loss(&[0.0; 4], &[1.0; 4], &[], &[]).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
        // Oracle.
        let rng = CounterRng::new(31);
        let s: Vec<f64> = (0..64).map(|i| rng.uniform(i, 0) * 5.0).collect();
        let l: Vec<f64> = (0..64).map(|i| f64::from(rng.uniform(i, 1) > 0.5)).collect();
        let ov: Vec<f64> = (0..32).map(|i| rng.uniform(i, 2)).collect();
        let tv: Vec<f64> = (0..32).map(|i| rng.uniform(i, 3)).collect();
        let got = geometry_loss(&s, &l, &ov, &tv).unwrap();
        let mut expect = 0.0;
        for i in 0..64 {
            expect += (s[i].tanh() - l[i]).powi(2) / 64.0;
        }
        for i in 0..32 {
            expect += (ov[i] - tv[i]).powi(2) / 32.0;
        }
        assert!((got - expect).abs() < 1e-12);
        assert!(geometry_loss(&s, &l[..10], &ov, &tv).is_err());
    }
}

