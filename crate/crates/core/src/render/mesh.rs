use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::Vector3;

use super::RenderError;

pub const DEFAULT_SEGMENTS: usize = 32;
pub const DEFAULT_COLOR: [f64; 3] = [0.7, 0.7, 0.72];

/// Vertex merge tolerance for STL facets, meters.
const STL_MERGE_TOLERANCE: f64 = 1e-9;

/// Indexed triangle mesh with per-vertex unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Vec<Vector3<f64>>,
    /// Linear RGB in `[0, 1]`.
    pub color: [f64; 3],
}

impl Mesh {
    /// Builds a mesh and computes area-weighted vertex normals.
    pub fn from_triangles(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, RenderError> {
        let normals = area_weighted_normals(&vertices, &triangles)?;
        Ok(Self {
            vertices,
            triangles,
            normals,
            color: DEFAULT_COLOR,
        })
    }

    pub fn with_color(mut self, color: [f64; 3]) -> Self {
        self.color = color;
        self
    }

    /// Applies a per-axis scale; normals follow the inverse transpose.
    pub fn scaled(mut self, scale: &Vector3<f64>) -> Self {
        for v in &mut self.vertices {
            v.component_mul_assign(scale);
        }
        let inv = scale.map(|s| 1.0 / s);
        for n in &mut self.normals {
            let m = n.component_mul(&inv);
            let len = m.norm();
            *n = if len > 0.0 { m / len } else { Vector3::z() };
        }
        if scale.x * scale.y * scale.z < 0.0 {
            for t in &mut self.triangles {
                t.swap(1, 2);
            }
        }
        self
    }

    /// Min and max corner of the axis-aligned bounding box.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        self.vertices.iter().fold(
            (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), v| (lo.inf(v), hi.sup(v)),
        )
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let n = self.vertices.len();
        if self.normals.len() != n {
            return Err(RenderError::CorruptFile(
                "normal count differs from vertex count".into(),
            ));
        }
        if self.triangles.iter().flatten().any(|&i| i as usize >= n) {
            return Err(RenderError::CorruptFile("triangle index out of range".into()));
        }
        if self.normals.iter().any(|m| (m.norm() - 1.0).abs() > 1e-4) {
            return Err(RenderError::CorruptFile("non-unit vertex normal".into()));
        }
        Ok(())
    }
}

fn area_weighted_normals(vertices: &[Vector3<f64>], triangles: &[[u32; 3]]) -> Result<Vec<Vector3<f64>>, RenderError> {
    let mut acc = vec![Vector3::zeros(); vertices.len()];
    for tri in triangles {
        let [a, b, c] = tri.map(|i| i as usize);
        if a >= vertices.len() || b >= vertices.len() || c >= vertices.len() {
            return Err(RenderError::CorruptFile("triangle index out of range".into()));
        }
        // Cross product length is twice the area, which weights the sum.
        let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
        for i in [a, b, c] {
            acc[i] += n;
        }
    }
    Ok(acc
        .into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vector3::z()
            }
        })
        .collect())
}

/// Loads an OBJ or binary STL file, chosen by extension.
pub fn load_mesh(path: &Path) -> Result<Mesh, RenderError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let io_err = |e: std::io::Error| RenderError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    match ext.as_str() {
        "obj" => parse_obj(&std::fs::read_to_string(path).map_err(io_err)?),
        "stl" => parse_stl(&std::fs::read(path).map_err(io_err)?),
        other => Err(RenderError::UnsupportedFormat(format!("`.{other}` mesh"))),
    }
}

fn parse_index(token: &str, count: usize, line: usize) -> Result<usize, RenderError> {
    let raw: i64 = token
        .parse()
        .map_err(|_| RenderError::CorruptFile(format!("line {line}: bad index `{token}`")))?;
    let idx = if raw > 0 { raw - 1 } else { count as i64 + raw };
    if raw == 0 || idx < 0 || idx as usize >= count {
        return Err(RenderError::CorruptFile(format!(
            "line {line}: index {raw} out of range"
        )));
    }
    Ok(idx as usize)
}

/// Parses Wavefront OBJ `v`, `vn` and `f` records; polygons are fan-triangulated.
pub fn parse_obj(text: &str) -> Result<Mesh, RenderError> {
    let mut positions: Vec<Vector3<f64>> = Vec::new();
    let mut obj_normals: Vec<Vector3<f64>> = Vec::new();
    let mut corners: HashMap<(usize, Option<usize>), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vertex_normals: Vec<Option<usize>> = Vec::new();
    let mut triangles = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or_default();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" | "vn" => {
                let vals: Vec<f64> = tokens
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| RenderError::CorruptFile(format!("line {lineno}: bad number `{t}`")))
                    })
                    .collect::<Result<_, _>>()?;
                if vals.len() != 3 {
                    return Err(RenderError::CorruptFile(format!(
                        "line {lineno}: expected 3 coordinates"
                    )));
                }
                let v = Vector3::new(vals[0], vals[1], vals[2]);
                if tag == "v" {
                    positions.push(v);
                } else {
                    obj_normals.push(v);
                }
            }
            "f" => {
                let mut face = Vec::new();
                for corner in tokens {
                    let mut parts = corner.split('/');
                    let v = parse_index(parts.next().unwrap_or_default(), positions.len(), lineno)?;
                    let _texcoord = parts.next();
                    let n = match parts.next() {
                        Some(t) if !t.is_empty() => Some(parse_index(t, obj_normals.len(), lineno)?),
                        _ => None,
                    };
                    let id = *corners.entry((v, n)).or_insert_with(|| {
                        vertices.push(positions[v]);
                        vertex_normals.push(n);
                        (vertices.len() - 1) as u32
                    });
                    face.push(id);
                }
                if face.len() < 3 {
                    return Err(RenderError::CorruptFile(format!(
                        "line {lineno}: face with fewer than 3 corners"
                    )));
                }
                for i in 1..face.len() - 1 {
                    triangles.push([face[0], face[i], face[i + 1]]);
                }
            }
            _ => {}
        }
    }

    if vertices.is_empty() || triangles.is_empty() {
        return Err(RenderError::CorruptFile("OBJ has no faces".into()));
    }
    let mut mesh = Mesh::from_triangles(vertices, triangles)?;
    let explicit: Option<Vec<Vector3<f64>>> = vertex_normals
        .iter()
        .map(|n| {
            n.map(|i| obj_normals[i])
                .filter(|n| n.norm() > 0.0)
                .map(|n| n.normalize())
        })
        .collect();
    if let Some(normals) = explicit {
        mesh.normals = normals;
    }
    Ok(mesh)
}

/// Parses binary STL; identical vertices (within 1e-9) are merged.
pub fn parse_stl(bytes: &[u8]) -> Result<Mesh, RenderError> {
    if bytes.len() < 84 {
        if bytes.starts_with(b"solid") {
            return Err(RenderError::UnsupportedFormat("ASCII STL".into()));
        }
        return Err(RenderError::CorruptFile(format!(
            "STL is {} bytes, header needs 84",
            bytes.len()
        )));
    }
    let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    let expected = 84 + count * 50;
    if bytes.len() != expected {
        if bytes.starts_with(b"solid") {
            return Err(RenderError::UnsupportedFormat("ASCII STL".into()));
        }
        return Err(RenderError::CorruptFile(format!(
            "STL declares {count} facets ({expected} bytes) but has {} bytes",
            bytes.len()
        )));
    }
    if count == 0 {
        return Err(RenderError::CorruptFile("STL has no facets".into()));
    }

    let read = |off: usize| f32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]) as f64;
    let mut index: HashMap<[i64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(count);
    for facet in 0..count {
        let base = 84 + facet * 50;
        let mut tri = [0u32; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let off = base + 12 + k * 12;
            let v = Vector3::new(read(off), read(off + 4), read(off + 8));
            if v.iter().any(|c| !c.is_finite()) {
                return Err(RenderError::CorruptFile(format!(
                    "facet {facet} has a non-finite vertex"
                )));
            }
            let key = v.map(|c| (c / STL_MERGE_TOLERANCE).round() as i64).into();
            *slot = *index.entry(key).or_insert_with(|| {
                vertices.push(v);
                (vertices.len() - 1) as u32
            });
        }
        triangles.push(tri);
    }
    Mesh::from_triangles(vertices, triangles)
}

/// Serializes a mesh as binary STL (one facet per triangle).
pub fn write_stl(mesh: &Mesh) -> Vec<u8> {
    let mut out = vec![0u8; 80];
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for tri in &mesh.triangles {
        let [a, b, c] = tri.map(|i| mesh.vertices[i as usize]);
        let n = (b - a).cross(&(c - a));
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        for v in [n, a, b, c] {
            for x in v.iter() {
                out.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Full edge lengths along x, y, z.
    Box {
        size: Vector3<f64>,
    },
    /// Axis along z, centered on the origin.
    Cylinder {
        radius: f64,
        length: f64,
    },
    Sphere {
        radius: f64,
    },
}

pub fn make_primitive(kind: Primitive) -> Result<Mesh, RenderError> {
    make_primitive_with(kind, DEFAULT_SEGMENTS)
}

/// Tessellates a primitive; `segments` controls cylinder and sphere resolution.
pub fn make_primitive_with(kind: Primitive, segments: usize) -> Result<Mesh, RenderError> {
    let segments = segments.max(3);
    match kind {
        Primitive::Box { size } => {
            if size.iter().any(|d| !(*d > 0.0)) {
                return Err(RenderError::NonPositiveDimension);
            }
            let h = size / 2.0;
            let vertices = (0..8)
                .map(|i| {
                    Vector3::new(
                        if i & 1 == 0 { -h.x } else { h.x },
                        if i & 2 == 0 { -h.y } else { h.y },
                        if i & 4 == 0 { -h.z } else { h.z },
                    )
                })
                .collect();
            // outward winding
            let triangles = vec![
                [0, 2, 3],
                [0, 3, 1],
                [4, 5, 7],
                [4, 7, 6],
                [0, 1, 5],
                [0, 5, 4],
                [2, 6, 7],
                [2, 7, 3],
                [0, 4, 6],
                [0, 6, 2],
                [1, 3, 7],
                [1, 7, 5],
            ];
            Mesh::from_triangles(vertices, triangles)
        }
        Primitive::Cylinder { radius, length } => {
            if !(radius > 0.0 && length > 0.0) {
                return Err(RenderError::NonPositiveDimension);
            }
            let hz = length / 2.0;
            let mut vertices = Vec::new();
            let mut normals = Vec::new();
            let mut triangles = Vec::new();
            let ring = |z: f64| {
                (0..segments).map(move |i| {
                    let a = TAU * i as f64 / segments as f64;
                    (
                        Vector3::new(radius * a.cos(), radius * a.sin(), z),
                        Vector3::new(a.cos(), a.sin(), 0.0),
                    )
                })
            };
            // side
            for (p, n) in ring(-hz).chain(ring(hz)) {
                vertices.push(p);
                normals.push(n);
            }
            let s = segments as u32;
            for i in 0..s {
                let j = (i + 1) % s;
                triangles.push([i, j, s + j]);
                triangles.push([i, s + j, s + i]);
            }
            // caps
            for (z, nz) in [(-hz, -1.0), (hz, 1.0)] {
                let center = vertices.len() as u32;
                vertices.push(Vector3::new(0.0, 0.0, z));
                normals.push(Vector3::new(0.0, 0.0, nz));
                for (p, _) in ring(z) {
                    vertices.push(p);
                    normals.push(Vector3::new(0.0, 0.0, nz));
                }
                for i in 0..s {
                    let (a, b) = (center + 1 + i, center + 1 + (i + 1) % s);
                    triangles.push(if nz > 0.0 { [center, a, b] } else { [center, b, a] });
                }
            }
            Ok(Mesh {
                vertices,
                triangles,
                normals,
                color: DEFAULT_COLOR,
            })
        }
        Primitive::Sphere { radius } => {
            if !(radius > 0.0) {
                return Err(RenderError::NonPositiveDimension);
            }
            let rings = (segments / 2).max(2);
            let mut vertices = Vec::new();
            let mut normals = Vec::new();
            for r in 0..=rings {
                let polar = PI * r as f64 / rings as f64;
                for s in 0..segments {
                    let az = TAU * s as f64 / segments as f64;
                    let n = Vector3::new(polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos());
                    let n = n.normalize();
                    vertices.push(n * radius);
                    normals.push(n);
                }
            }
            let seg = segments as u32;
            let mut triangles = Vec::new();
            for r in 0..rings as u32 {
                for s in 0..seg {
                    let a = r * seg + s;
                    let b = r * seg + (s + 1) % seg;
                    let c = a + seg;
                    let d = b + seg;
                    if r != 0 {
                        triangles.push([a, c, b]);
                    }
                    if r + 1 != rings as u32 {
                        triangles.push([b, c, d]);
                    }
                }
            }
            Ok(Mesh {
                vertices,
                triangles,
                normals,
                color: DEFAULT_COLOR,
            })
        }
    }
}
