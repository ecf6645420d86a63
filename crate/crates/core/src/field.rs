//! The radiance-field abstraction and analytic test fields, plus the
//! feature utilities (positional encoding, spherical harmonics, seeded
//! random projection) used for blending keys.

use crate::grid::{QueryScratch, VoxelGrid};
use crate::math::Vec3;
use crate::mesh::TriMesh;
use crate::raycast::{hits_ambiguous_for_parity, intersect_ray};
use crate::rng::CounterRng;

/// One field evaluation: density (1/m, >= 0), radiance in [0,1]^3, and an
/// optional feature vector for blending keys.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub sigma: f64,
    pub radiance: [f64; 3],
    pub feature: Vec<f64>,
}

impl FieldSample {
    pub fn empty() -> FieldSample {
        FieldSample {
            sigma: 0.0,
            radiance: [0.0; 3],
            feature: Vec::new(),
        }
    }
}

/// A volumetric density + radiance function. Implementations must be safe
/// for concurrent read-only evaluation; rendering fans out over pixels.
pub trait RadianceField: Sync {
    fn sample(&self, x: Vec3, dir: Vec3) -> FieldSample;
}

/// Constant density and color inside a ball, vacuum outside.
pub struct UniformBall {
    pub center: Vec3,
    pub radius: f64,
    pub sigma: f64,
    pub color: [f64; 3],
}

impl RadianceField for UniformBall {
    fn sample(&self, x: Vec3, _dir: Vec3) -> FieldSample {
        if (x - self.center).norm_sq() <= self.radius * self.radius {
            FieldSample {
                sigma: self.sigma,
                radiance: self.color,
                feature: Vec::new(),
            }
        } else {
            FieldSample::empty()
        }
    }
}

/// Isotropic Gaussian density: sigma0 * exp(-||x - c||^2 / (2 s^2)).
pub struct GaussianBlob {
    pub center: Vec3,
    pub sigma0: f64,
    pub spread: f64,
    pub color: [f64; 3],
}

impl RadianceField for GaussianBlob {
    fn sample(&self, x: Vec3, _dir: Vec3) -> FieldSample {
        let d2 = (x - self.center).norm_sq();
        FieldSample {
            sigma: self.sigma0 * (-d2 / (2.0 * self.spread * self.spread)).exp(),
            radiance: self.color,
            feature: Vec::new(),
        }
    }
}

/// Density concentrated in a band of half-width `band` around a mesh
/// surface: sigma0 * 1[|unsigned distance| < band]. Used for
/// reconstruction round-trips, so it only needs the unsigned distance.
pub struct MeshShell<'a> {
    pub mesh: &'a TriMesh,
    pub grid: &'a VoxelGrid,
    pub band: f64,
    pub sigma0: f64,
    pub color: [f64; 3],
}

impl RadianceField for MeshShell<'_> {
    fn sample(&self, x: Vec3, _dir: Vec3) -> FieldSample {
        let mut scratch = QueryScratch::default();
        let cp = self.grid.closest_point_with(self.mesh, x, &mut scratch);
        if cp.distance < self.band {
            FieldSample {
                sigma: self.sigma0,
                radiance: self.color,
                feature: Vec::new(),
            }
        } else {
            FieldSample::empty()
        }
    }
}

/// Solid interior of a watertight mesh: sigma0 inside, vacuum outside.
pub struct MeshSolid<'a> {
    pub mesh: &'a TriMesh,
    pub grid: &'a VoxelGrid,
    pub sigma0: f64,
    pub color: [f64; 3],
}

impl RadianceField for MeshSolid<'_> {
    fn sample(&self, x: Vec3, _dir: Vec3) -> FieldSample {
        // Ray-parity sign test; same tie handling as the SDF sign.
        let diag = self.mesh.bbox().diagonal();
        let dir = Vec3::new(
            0.577_350_269_189_625_8,
            0.577_350_269_189_625_8,
            0.577_350_269_189_625_8,
        );
        let mut origin = x;
        let mut parity = 0usize;
        for attempt in 0..3 {
            let hits = intersect_ray(self.mesh, self.grid, origin, dir);
            parity = hits.len();
            if !hits_ambiguous_for_parity(&hits) {
                break;
            }
            let eps = 1e-9 * diag * (attempt + 1) as f64;
            origin = x + Vec3::new(eps, 2.0 * eps, 3.0 * eps);
        }
        if parity % 2 == 1 {
            FieldSample {
                sigma: self.sigma0,
                radiance: self.color,
                feature: Vec::new(),
            }
        } else {
            FieldSample::empty()
        }
    }
}

/// Sin/cos positional encoding: for each axis and each octave j < octaves,
/// emits sin(2^j pi x) and cos(2^j pi x). Output length 6 * octaves.
pub fn positional_encoding(x: Vec3, octaves: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(6 * octaves as usize);
    for a in 0..3 {
        let v = x.axis(a);
        for j in 0..octaves {
            let w = (1u64 << j) as f64 * std::f64::consts::PI * v;
            out.push(w.sin());
            out.push(w.cos());
        }
    }
    out
}

/// Real spherical harmonics of the first 3 orders (l = 0, 1, 2): nine
/// coefficients evaluated at a unit direction.
pub fn spherical_harmonics_9(d: Vec3) -> [f64; 9] {
    let (x, y, z) = (d.x, d.y, d.z);
    [
        0.282_094_791_773_878_14,          // l=0
        0.488_602_511_902_919_9 * y,       // l=1, m=-1
        0.488_602_511_902_919_9 * z,       // l=1, m=0
        0.488_602_511_902_919_9 * x,       // l=1, m=1
        1.092_548_430_592_079_2 * x * y,   // l=2, m=-2
        1.092_548_430_592_079_2 * y * z,   // l=2, m=-1
        0.315_391_565_252_520_05 * (3.0 * z * z - 1.0), // l=2, m=0
        1.092_548_430_592_079_2 * x * z,   // l=2, m=1
        0.546_274_215_296_039_6 * (x * x - y * y), // l=2, m=2
    ]
}

/// Deterministic analytic stand-in for the learned query/key networks:
/// concatenates positional encoding of the point with spherical harmonics
/// of the direction and an optional context feature, then projects to
/// `width` by a fixed seeded random matrix.
pub struct FeatureProvider {
    pub octaves: u32,
    pub width: usize,
    seed: u64,
}

impl FeatureProvider {
    pub fn new(octaves: u32, width: usize, seed: u64) -> FeatureProvider {
        FeatureProvider { octaves, width, seed }
    }

    /// Key/query vector of length `width` for (x, direction, context).
    pub fn feature(&self, x: Vec3, dir: Vec3, context: &[f64]) -> Vec<f64> {
        let mut input = positional_encoding(x, self.octaves);
        input.extend_from_slice(&spherical_harmonics_9(dir));
        input.extend_from_slice(context);
        self.project(&input)
    }

    /// Fixed Gaussian-ish random projection: entries from the counter RNG
    /// keyed by (row, column), scaled by 1/sqrt(fan-in).
    fn project(&self, input: &[f64]) -> Vec<f64> {
        let rng = CounterRng::new(self.seed);
        let scale = 1.0 / (input.len() as f64).sqrt();
        (0..self.width)
            .map(|row| {
                input
                    .iter()
                    .enumerate()
                    .map(|(col, &v)| {
                        let u = rng.uniform(row as u64, col as u64);
                        (2.0 * u - 1.0) * scale * v
                    })
                    .sum()
            })
            .collect()
    }

    /// Visibility-weighted mean of per-view feature vectors; uniform mean
    /// when every weight is zero.
    pub fn pooled(features: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
        assert_eq!(features.len(), weights.len());
        if features.is_empty() {
            return Vec::new();
        }
        let dim = features[0].len();
        let wsum: f64 = weights.iter().sum();
        let mut out = vec![0.0; dim];
        if wsum <= 0.0 {
            for f in features {
                for (o, &v) in out.iter_mut().zip(f) {
                    *o += v / features.len() as f64;
                }
            }
        } else {
            for (f, &w) in features.iter().zip(weights) {
                for (o, &v) in out.iter_mut().zip(f) {
                    *o += w / wsum * v;
                }
            }
        }
        out
    }
}
