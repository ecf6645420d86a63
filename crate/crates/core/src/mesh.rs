//! Indexed triangle meshes: loading, validation, topology checks.

use crate::math::{Aabb, Vec3};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

/// Faces with area below this are rejected at load; closest-point and
/// normal computations are ill-defined on them.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },
    #[error("degenerate faces (area < {DEGENERATE_AREA}): {faces:?}")]
    DegenerateFaces { faces: Vec<usize> },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("canonical vertex buffer mismatch: {0}")]
    CanonicalMismatch(String),
    #[error("mesh is empty")]
    Empty,
}

/// Indexed triangle mesh, optionally paired with a canonical-pose vertex
/// buffer over the same topology.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub canonical_vertices: Option<Vec<Vec3>>,
}

impl TriMesh {
    /// Builds a mesh, enforcing index bounds and rejecting degenerate faces.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(MeshError::Empty);
        }
        for (fi, f) in faces.iter().enumerate() {
            for &vi in f {
                if vi as usize >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: vi as usize,
                        count: vertices.len(),
                    });
                }
            }
        }
        let mesh = TriMesh {
            vertices,
            faces,
            canonical_vertices: None,
        };
        let degenerate: Vec<usize> = (0..mesh.faces.len())
            .filter(|&fi| mesh.face_area(fi) < DEGENERATE_AREA)
            .collect();
        if !degenerate.is_empty() {
            return Err(MeshError::DegenerateFaces { faces: degenerate });
        }
        Ok(mesh)
    }

    #[inline]
    pub fn face_vertices(&self, fi: usize) -> [Vec3; 3] {
        let f = self.faces[fi];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn face_normal(&self, fi: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(fi);
        (b - a).cross(c - a).normalized()
    }

    pub fn face_area(&self, fi: usize) -> f64 {
        let [a, b, c] = self.face_vertices(fi);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Attaches a canonical-pose vertex buffer. The donor mesh must have the
    /// exact same face list; a mismatch is a hard error.
    pub fn attach_canonical(&mut self, canonical: &TriMesh) -> Result<(), MeshError> {
        if canonical.vertices.len() != self.vertices.len() {
            return Err(MeshError::CanonicalMismatch(format!(
                "vertex counts differ: {} vs {}",
                self.vertices.len(),
                canonical.vertices.len()
            )));
        }
        if canonical.faces != self.faces {
            return Err(MeshError::CanonicalMismatch(
                "face lists differ".to_string(),
            ));
        }
        self.canonical_vertices = Some(canonical.vertices.clone());
        Ok(())
    }

    /// Barycentric interpolation over a face's canonical vertices.
    pub fn canonical_point(&self, fi: usize, bary: [f64; 3]) -> Result<Vec3, MeshError> {
        let canon = self
            .canonical_vertices
            .as_ref()
            .ok_or_else(|| MeshError::CanonicalMismatch("no canonical vertices".to_string()))?;
        let f = self.faces[fi];
        Ok(canon[f[0] as usize] * bary[0]
            + canon[f[1] as usize] * bary[1]
            + canon[f[2] as usize] * bary[2])
    }

    /// True iff every undirected edge is shared by exactly two faces with
    /// opposite directed orientation.
    pub fn is_watertight(&self) -> bool {
        // Count directed edges; watertight manifold means each directed edge
        // occurs exactly once and its reverse exactly once.
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                let e = (f[k], f[(k + 1) % 3]);
                *directed.entry(e).or_insert(0) += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            if n != 1 || directed.get(&(b, a)).copied().unwrap_or(0) != 1 {
                return false;
            }
        }
        true
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|fi| self.face_area(fi)).sum()
    }
}

/// Loads an OBJ or PLY mesh, preserving vertex order from the file.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let file = std::fs::File::open(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match ext.as_str() {
        "obj" => load_obj(BufReader::new(file), &path.display().to_string()),
        "ply" => load_ply(BufReader::new(file), &path.display().to_string()),
        other => Err(MeshError::UnsupportedFormat(other.to_string())),
    }
}

fn load_obj<R: BufRead>(reader: R, path: &str) -> Result<TriMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| MeshError::Io {
            path: path.to_string(),
            source,
        })?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut coord = |name: &str| -> Result<f64, MeshError> {
                    it.next()
                        .ok_or(())
                        .and_then(|s| s.parse::<f64>().map_err(|_| ()))
                        .map_err(|_| MeshError::Parse {
                            path: path.to_string(),
                            line: lineno,
                            message: format!("bad vertex {name} coordinate"),
                        })
                };
                let x = coord("x")?;
                let y = coord("y")?;
                let z = coord("z")?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(4);
                for tok in it {
                    // "v", "v/vt", "v/vt/vn", "v//vn" forms; only the vertex index matters.
                    let v = tok.split('/').next().unwrap_or("");
                    let i: i64 = v.parse().map_err(|_| MeshError::Parse {
                        path: path.to_string(),
                        line: lineno,
                        message: format!("bad face index {tok:?}"),
                    })?;
                    let resolved = if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        i - 1 // 1-based
                    };
                    if resolved < 0 {
                        return Err(MeshError::Parse {
                            path: path.to_string(),
                            line: lineno,
                            message: format!("face index {i} resolves below zero"),
                        });
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(MeshError::Parse {
                        path: path.to_string(),
                        line: lineno,
                        message: "face with fewer than 3 vertices".to_string(),
                    });
                }
                // Fan-triangulate polygons.
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

fn load_ply<R: BufRead>(mut reader: R, path: &str) -> Result<TriMesh, MeshError> {
    let perr = |line: usize, message: String| MeshError::Parse {
        path: path.to_string(),
        line,
        message,
    };
    let mut header = Vec::new();
    let mut lineno = 0;
    // Read header line-by-line (byte-wise so binary payload stays untouched).
    loop {
        lineno += 1;
        let mut line = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            let n = reader.read(&mut byte).map_err(|source| MeshError::Io {
                path: path.to_string(),
                source,
            })?;
            if n == 0 || byte[0] == b'\n' {
                break;
            }
            line.push(byte[0]);
        }
        let text = String::from_utf8_lossy(&line).trim_end().to_string();
        let done = text == "end_header";
        header.push(text);
        if done {
            break;
        }
        if lineno > 1000 {
            return Err(perr(lineno, "header not terminated".to_string()));
        }
    }
    if header.first().map(String::as_str) != Some("ply") {
        return Err(perr(1, "missing ply magic".to_string()));
    }

    #[derive(PartialEq)]
    enum Format {
        Ascii,
        BinaryLe,
    }
    let mut format = None;
    let mut vertex_count = 0usize;
    let mut face_count = 0usize;
    // (element, per-vertex property scalar types)
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current_element = String::new();
    for (i, line) in header.iter().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                format = match toks.get(1).copied() {
                    Some("ascii") => Some(Format::Ascii),
                    Some("binary_little_endian") => Some(Format::BinaryLe),
                    other => {
                        return Err(perr(i + 1, format!("unsupported ply format {other:?}")));
                    }
                };
            }
            Some("element") => {
                current_element = toks.get(1).copied().unwrap_or("").to_string();
                let count: usize = toks
                    .get(2)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| perr(i + 1, "bad element count".to_string()))?;
                match current_element.as_str() {
                    "vertex" => vertex_count = count,
                    "face" => face_count = count,
                    _ => {}
                }
            }
            Some("property") if current_element == "vertex" => {
                vertex_props.push(toks.get(1).copied().unwrap_or("").to_string());
            }
            _ => {}
        }
    }
    let format = format.ok_or_else(|| perr(1, "missing format line".to_string()))?;

    let scalar_size = |ty: &str| -> Result<usize, MeshError> {
        Ok(match ty {
            "char" | "uchar" | "int8" | "uint8" => 1,
            "short" | "ushort" | "int16" | "uint16" => 2,
            "int" | "uint" | "int32" | "uint32" | "float" | "float32" => 4,
            "double" | "float64" => 8,
            other => return Err(perr(0, format!("unknown ply scalar type {other}"))),
        })
    };

    let mut vertices = Vec::with_capacity(vertex_count);
    let mut faces = Vec::with_capacity(face_count);
    match format {
        Format::Ascii => {
            let text = {
                let mut s = String::new();
                reader.read_to_string(&mut s).map_err(|source| MeshError::Io {
                    path: path.to_string(),
                    source,
                })?;
                s
            };
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for k in 0..vertex_count {
                let line = lines
                    .next()
                    .ok_or_else(|| perr(lineno + k, "missing vertex row".to_string()))?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse().unwrap_or(f64::NAN))
                    .collect();
                if vals.len() < 3 || vals[..3].iter().any(|v| v.is_nan()) {
                    return Err(perr(lineno + k, format!("bad vertex row {line:?}")));
                }
                vertices.push(Vec3::new(vals[0], vals[1], vals[2]));
            }
            for k in 0..face_count {
                let line = lines
                    .next()
                    .ok_or_else(|| perr(lineno + vertex_count + k, "missing face row".to_string()))?;
                let vals: Vec<i64> = line
                    .split_whitespace()
                    .map(|t| t.parse().unwrap_or(-1))
                    .collect();
                if vals.is_empty() || vals[0] < 3 || vals.len() < 1 + vals[0] as usize {
                    return Err(perr(lineno + vertex_count + k, format!("bad face row {line:?}")));
                }
                let idx = &vals[1..1 + vals[0] as usize];
                for j in 1..idx.len() - 1 {
                    faces.push([idx[0] as u32, idx[j] as u32, idx[j + 1] as u32]);
                }
            }
        }
        Format::BinaryLe => {
            let mut buf = Vec::new();
            reader.read_to_end(&mut buf).map_err(|source| MeshError::Io {
                path: path.to_string(),
                source,
            })?;
            let mut off = 0usize;
            let read_f = |buf: &[u8], off: usize, ty: &str| -> Result<(f64, usize), MeshError> {
                let sz = scalar_size(ty)?;
                if off + sz > buf.len() {
                    return Err(perr(0, format!("truncated ply payload at offset {off}")));
                }
                let v = match ty {
                    "float" | "float32" => {
                        f32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as f64
                    }
                    "double" | "float64" => {
                        f64::from_le_bytes(buf[off..off + 8].try_into().unwrap())
                    }
                    "char" | "int8" => buf[off] as i8 as f64,
                    "uchar" | "uint8" => buf[off] as f64,
                    "short" | "int16" => {
                        i16::from_le_bytes(buf[off..off + 2].try_into().unwrap()) as f64
                    }
                    "ushort" | "uint16" => {
                        u16::from_le_bytes(buf[off..off + 2].try_into().unwrap()) as f64
                    }
                    "int" | "int32" => {
                        i32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as f64
                    }
                    "uint" | "uint32" => {
                        u32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as f64
                    }
                    other => return Err(perr(0, format!("unknown ply scalar type {other}"))),
                };
                Ok((v, off + sz))
            };
            if vertex_props.len() < 3 {
                return Err(perr(0, "vertex element needs at least x y z".to_string()));
            }
            for _ in 0..vertex_count {
                let mut coords = [0.0; 3];
                for (pi, ty) in vertex_props.iter().enumerate() {
                    let (v, next) = read_f(&buf, off, ty)?;
                    if pi < 3 {
                        coords[pi] = v;
                    }
                    off = next;
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            // Face lists are assumed "uchar count, int/uint indices" (the
            // ubiquitous layout) unless the header says otherwise; we read the
            // declared list property types.
            let (count_ty, index_ty) = {
                let mut ct = "uchar".to_string();
                let mut it = "int".to_string();
                let mut in_face = false;
                for line in &header {
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    match toks.first().copied() {
                        Some("element") => in_face = toks.get(1).copied() == Some("face"),
                        Some("property") if in_face && toks.get(1).copied() == Some("list") => {
                            ct = toks.get(2).copied().unwrap_or("uchar").to_string();
                            it = toks.get(3).copied().unwrap_or("int").to_string();
                        }
                        _ => {}
                    }
                }
                (ct, it)
            };
            for _ in 0..face_count {
                let (n, next) = read_f(&buf, off, &count_ty)?;
                off = next;
                let n = n as usize;
                if n < 3 {
                    return Err(perr(0, format!("face with {n} vertices")));
                }
                let mut idx = Vec::with_capacity(n);
                for _ in 0..n {
                    let (v, next) = read_f(&buf, off, &index_ty)?;
                    off = next;
                    idx.push(v as u32);
                }
                for j in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[j], idx[j + 1]]);
                }
            }
        }
    }
    TriMesh::new(vertices, faces)
}

/// Writes a mesh as ASCII OBJ.
pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|source| {
        MeshError::Io {
            path: path.display().to_string(),
            source,
        }
    })?);
    let werr = |source: std::io::Error| MeshError::Io {
        path: path.display().to_string(),
        source,
    };
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).map_err(werr)?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).map_err(werr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use std::io::Cursor;

    #[test]
    fn cube_counts() {
        let cube = shapes::cube(1.0);
        assert_eq!(cube.vertices.len(), 8);
        assert_eq!(cube.faces.len(), 12);
        assert!(cube.is_watertight());
    }

    #[test]
    fn obj_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.obj");
        let cube = shapes::cube(2.0);
        save_obj(&cube, &path).unwrap();
        let loaded = load_mesh(&path).unwrap();
        assert_eq!(loaded.vertices.len(), 8);
        assert_eq!(loaded.faces.len(), 12);
        assert_eq!(loaded.faces, cube.faces);
    }

    #[test]
    fn obj_index_out_of_range() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 10\n";
        let err = load_obj(Cursor::new(src), "mem.obj").unwrap_err();
        match err {
            MeshError::IndexOutOfRange { index, count, .. } => {
                assert_eq!(index, 9);
                assert_eq!(count, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn obj_degenerate_face_rejected() {
        let src = "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n";
        let err = load_obj(Cursor::new(src), "mem.obj").unwrap_err();
        assert!(matches!(err, MeshError::DegenerateFaces { .. }));
    }

    #[test]
    fn obj_parse_error_carries_line() {
        let src = "v 0 0 0\nv 1 0 x\n";
        let err = load_obj(Cursor::new(src), "mem.obj").unwrap_err();
        match err {
            MeshError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn icosphere_subdivision_counts() {
        // |F| = 20 * 4^n for n subdivisions of an icosahedron.
        let s = shapes::icosphere(3, 1.0);
        assert_eq!(s.faces.len(), 1280);
        assert_eq!(s.vertices.len(), 642);
        assert!(s.is_watertight());
    }

    #[test]
    fn open_mesh_is_not_watertight() {
        let mut cube = shapes::cube(1.0);
        cube.faces.pop();
        assert!(!cube.is_watertight());
    }

    #[test]
    fn disjoint_closed_spheres_are_watertight() {
        let a = shapes::icosphere(1, 1.0);
        let b = shapes::translated(&shapes::icosphere(1, 1.0), Vec3::new(5.0, 0.0, 0.0));
        let offset = a.vertices.len() as u32;
        let mut vertices = a.vertices.clone();
        vertices.extend(b.vertices.iter().copied());
        let mut faces = a.faces.clone();
        faces.extend(b.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        let both = TriMesh::new(vertices, faces).unwrap();
        assert!(both.is_watertight());
    }

    #[test]
    fn ply_ascii_and_binary() {
        let ascii = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let m = load_ply(Cursor::new(ascii), "mem.ply").unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.faces.len(), 1);

        let mut bin: Vec<u8> = Vec::new();
        bin.extend_from_slice(b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n");
        for v in [[0f32, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] {
            for c in v {
                bin.extend_from_slice(&c.to_le_bytes());
            }
        }
        bin.push(3);
        for i in [0i32, 1, 2] {
            bin.extend_from_slice(&i.to_le_bytes());
        }
        let m2 = load_ply(Cursor::new(bin), "mem.ply").unwrap();
        assert_eq!(m2.vertices.len(), 3);
        assert_eq!(m2.faces, m.faces);
        assert!((m2.vertices[1].x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_attach_checks_topology() {
        let mut a = shapes::cube(1.0);
        let b = shapes::cube(2.0);
        a.attach_canonical(&b).unwrap();
        assert!(a.canonical_vertices.is_some());

        let mut c = shapes::cube(1.0);
        let sphere = shapes::icosphere(1, 1.0);
        assert!(c.attach_canonical(&sphere).is_err());
    }
}
