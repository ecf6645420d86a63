//! Procedural test meshes: cube, icosphere, torus, deformed sphere.

use crate::math::{Mat3, Vec3};
use crate::mesh::TriMesh;
use crate::rng::CounterRng;
use std::collections::HashMap;

/// Axis-aligned cube of the given edge length centered at the origin,
/// 8 vertices and 12 outward-wound faces.
pub fn cube(edge: f64) -> TriMesh {
    let h = edge * 0.5;
    let vertices = vec![
        Vec3::new(-h, -h, -h),
        Vec3::new(h, -h, -h),
        Vec3::new(h, h, -h),
        Vec3::new(-h, h, -h),
        Vec3::new(-h, -h, h),
        Vec3::new(h, -h, h),
        Vec3::new(h, h, h),
        Vec3::new(-h, h, h),
    ];
    let faces = vec![
        // -z
        [0, 2, 1],
        [0, 3, 2],
        // +z
        [4, 5, 6],
        [4, 6, 7],
        // -y
        [0, 1, 5],
        [0, 5, 4],
        // +y
        [3, 6, 2],
        [3, 7, 6],
        // -x
        [0, 4, 7],
        [0, 7, 3],
        // +x
        [1, 2, 6],
        [1, 6, 5],
    ];
    TriMesh::new(vertices, faces).expect("cube is valid")
}

/// Icosphere with `subdivisions` rounds of 4-way face splitting,
/// radius `radius`, centered at the origin. |F| = 20 * 4^n.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = vec![
        Vec3::new(-1.0, phi, 0.0),
        Vec3::new(1.0, phi, 0.0),
        Vec3::new(-1.0, -phi, 0.0),
        Vec3::new(1.0, -phi, 0.0),
        Vec3::new(0.0, -1.0, phi),
        Vec3::new(0.0, 1.0, phi),
        Vec3::new(0.0, -1.0, -phi),
        Vec3::new(0.0, 1.0, -phi),
        Vec3::new(phi, 0.0, -1.0),
        Vec3::new(phi, 0.0, 1.0),
        Vec3::new(-phi, 0.0, -1.0),
        Vec3::new(-phi, 0.0, 1.0),
    ]
    .into_iter()
    .map(|v| v.normalized())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0u32; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = ((vertices[a as usize] + vertices[b as usize]) * 0.5).normalized();
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    TriMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Torus of major radius `major` and tube radius `minor`, `nu` segments
/// around the main ring and `nv` around the tube.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = i as f64 / nu as f64 * std::f64::consts::TAU;
        for j in 0..nv {
            let v = j as f64 / nv as f64 * std::f64::consts::TAU;
            let r = major + minor * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let mut faces = Vec::with_capacity(nu * nv * 2);
    for i in 0..nu {
        for j in 0..nv {
            let a = (i * nv + j) as u32;
            let b = (((i + 1) % nu) * nv + j) as u32;
            let c = (((i + 1) % nu) * nv + (j + 1) % nv) as u32;
            let d = (i * nv + (j + 1) % nv) as u32;
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, faces).expect("torus is valid")
}

/// Icosphere with a seeded smooth radial deformation; stays star-shaped
/// around the origin (radius scale in [1-amplitude, 1+amplitude]).
pub fn deformed_sphere(subdivisions: u32, radius: f64, amplitude: f64, seed: u64) -> TriMesh {
    let base = icosphere(subdivisions, radius);
    let rng = CounterRng::new(seed);
    // Low-frequency lumps from a few random spherical harmonics-ish bumps.
    let mut centers = Vec::new();
    for i in 0..8u64 {
        let u = rng.uniform(1, i * 2) * 2.0 - 1.0;
        let theta = rng.uniform(1, i * 2 + 1) * std::f64::consts::TAU;
        let s = (1.0 - u * u).sqrt();
        centers.push(Vec3::new(s * theta.cos(), s * theta.sin(), u));
    }
    let vertices = base
        .vertices
        .iter()
        .map(|&v| {
            let dir = v.normalized();
            let mut bump = 0.0;
            for (k, c) in centers.iter().enumerate() {
                bump += ((k as f64 + 2.0) * dir.dot(*c)).sin();
            }
            v * (1.0 + amplitude * bump / centers.len() as f64)
        })
        .collect();
    TriMesh::new(vertices, base.faces).expect("deformed sphere is valid")
}

pub fn translated(mesh: &TriMesh, offset: Vec3) -> TriMesh {
    let vertices = mesh.vertices.iter().map(|&v| v + offset).collect();
    let mut out = TriMesh::new(vertices, mesh.faces.clone()).expect("translation preserves validity");
    out.canonical_vertices = mesh.canonical_vertices.clone();
    out
}

pub fn transformed(mesh: &TriMesh, rotation: Mat3, translation: Vec3) -> TriMesh {
    let vertices = mesh
        .vertices
        .iter()
        .map(|&v| rotation * v + translation)
        .collect();
    let mut out = TriMesh::new(vertices, mesh.faces.clone()).expect("rigid transform preserves validity");
    out.canonical_vertices = mesh.canonical_vertices.clone();
    out
}
