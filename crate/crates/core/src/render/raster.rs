use std::sync::Arc;

use image::{Rgb, RgbImage};
use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use super::mesh::Mesh;
use super::{DepthMap, Mask};
use crate::geometry::{CameraIntrinsics, Se3};

pub const DEFAULT_NEAR_PLANE: f64 = 0.01;

/// Rows rasterized per parallel work item.
const BAND_ROWS: usize = 16;

/// Directional light in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Light {
    /// Direction the light travels (unit), camera frame.
    pub direction: [f64; 3],
    pub ambient: f64,
    pub diffuse: f64,
}

impl Default for Light {
    fn default() -> Self {
        Self {
            direction: [0.0, 0.0, 1.0],
            ambient: 0.35,
            diffuse: 0.65,
        }
    }
}

impl Light {
    pub fn validate(&self) -> Result<(), String> {
        let d = Vector3::from(self.direction);
        if !d.iter().all(|v| v.is_finite()) || (d.norm() - 1.0).abs() > 1e-6 {
            return Err(format!("light direction {:?} must be a unit vector", self.direction));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.ambient) || !unit.contains(&self.diffuse) || self.ambient + self.diffuse > 1.2 {
            return Err(format!(
                "light terms must lie in [0, 1] with ambient + diffuse <= 1.2 (got {} + {})",
                self.ambient, self.diffuse
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MeshInstance {
    pub mesh: Arc<Mesh>,
    /// Mesh frame in the camera frame.
    pub pose: Se3,
}

#[derive(Debug, Clone)]
pub struct RenderScene {
    pub instances: Vec<MeshInstance>,
    pub intrinsics: CameraIntrinsics,
    pub light: Light,
    pub near: f64,
}

impl RenderScene {
    pub fn new(intrinsics: CameraIntrinsics) -> Self {
        Self {
            instances: Vec::new(),
            intrinsics,
            light: Light::default(),
            near: DEFAULT_NEAR_PLANE,
        }
    }

    pub fn push(&mut self, mesh: Arc<Mesh>, pose: Se3) {
        self.instances.push(MeshInstance { mesh, pose });
    }
}

/// Robot color, depth and coverage for one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdRender {
    pub rgb: RgbImage,
    /// Camera-space z in meters, `+∞` where nothing was drawn.
    pub depth: DepthMap,
    pub coverage: Mask,
}

impl RgbdRender {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            rgb: RgbImage::new(width, height),
            depth: DepthMap::filled(width, height, f32::INFINITY),
            coverage: Mask::new(width, height),
        }
    }

    pub fn width(&self) -> u32 {
        self.depth.width()
    }

    pub fn height(&self) -> u32 {
        self.depth.height()
    }

    /// Checks that coverage and finite depth agree and depths are positive.
    pub fn is_coherent(&self) -> bool {
        self.depth
            .data()
            .iter()
            .zip(self.coverage.data())
            .all(|(d, c)| d.is_finite() == *c && (!d.is_finite() || *d > 0.0))
    }
}

#[derive(Clone, Copy)]
struct ClipVertex {
    pos: Vector3<f64>,
    normal: Vector3<f64>,
}

struct ScreenTriangle {
    p: [Vector2<f64>; 3],
    inv_z: [f64; 3],
    /// normal / z, for perspective-correct interpolation
    n_over_z: [Vector3<f64>; 3],
    area: f64,
    top_left: [bool; 3],
    color: [f64; 3],
    x_range: (usize, usize),
    y_range: (usize, usize),
}

/// Clips a camera-space polygon to `z >= near`.
fn clip_near(poly: &[ClipVertex], near: f64) -> Vec<ClipVertex> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let a_in = a.pos.z >= near;
        let b_in = b.pos.z >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.pos.z) / (b.pos.z - a.pos.z);
            let mut pos = a.pos + (b.pos - a.pos) * t;
            pos.z = near;
            out.push(ClipVertex {
                pos,
                normal: a.normal + (b.normal - a.normal) * t,
            });
        }
    }
    out
}

/// Pixel index range whose centers `i + 0.5` fall inside `[lo, hi]`.
fn center_range(lo: f64, hi: f64, size: u32) -> Option<(usize, usize)> {
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(size as f64 - 1.0);
    (first <= last).then_some((first as usize, last as usize))
}

fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (p.x - a.x) * (b.y - a.y) - (p.y - a.y) * (b.x - a.x)
}

/// With positive-area winding and y down, left edges run downwards and top
/// edges run leftwards.
fn is_top_left(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let dy = b.y - a.y;
    dy > 0.0 || (dy == 0.0 && b.x < a.x)
}

fn setup(scene: &RenderScene) -> Vec<ScreenTriangle> {
    let k = &scene.intrinsics;
    let mut out = Vec::new();
    for inst in &scene.instances {
        let mesh = &inst.mesh;
        for tri in &mesh.triangles {
            let poly: Vec<ClipVertex> = tri
                .iter()
                .map(|&i| ClipVertex {
                    pos: inst.pose.transform_point(&mesh.vertices[i as usize]),
                    normal: inst.pose.transform_vector(&mesh.normals[i as usize]),
                })
                .collect();
            let clipped = if poly.iter().all(|v| v.pos.z >= scene.near) {
                poly
            } else {
                clip_near(&poly, scene.near)
            };
            for i in 1..clipped.len().saturating_sub(1) {
                if let Some(t) = screen_triangle(k, [clipped[0], clipped[i], clipped[i + 1]], mesh.color) {
                    out.push(t);
                }
            }
        }
    }
    out
}

fn screen_triangle(k: &CameraIntrinsics, mut v: [ClipVertex; 3], color: [f64; 3]) -> Option<ScreenTriangle> {
    let project = |c: &ClipVertex| Vector2::new(k.fx * c.pos.x / c.pos.z + k.cx, k.fy * c.pos.y / c.pos.z + k.cy);
    let mut p = [project(&v[0]), project(&v[1]), project(&v[2])];
    let mut area = edge(&p[0], &p[1], &p[2]);
    if area < 0.0 {
        v.swap(1, 2);
        p.swap(1, 2);
        area = -area;
    }
    if !(area > 1e-12) || !area.is_finite() {
        return None;
    }
    let lo = p[0].inf(&p[1]).inf(&p[2]);
    let hi = p[0].sup(&p[1]).sup(&p[2]);
    let x_range = center_range(lo.x, hi.x, k.width)?;
    let y_range = center_range(lo.y, hi.y, k.height)?;
    Some(ScreenTriangle {
        p,
        inv_z: v.map(|c| 1.0 / c.pos.z),
        n_over_z: v.map(|c| c.normal / c.pos.z),
        area,
        // edge i is opposite vertex i
        top_left: [
            is_top_left(&p[1], &p[2]),
            is_top_left(&p[2], &p[0]),
            is_top_left(&p[0], &p[1]),
        ],
        color,
        x_range,
        y_range,
    })
}

fn shade(normal: &Vector3<f64>, light: &Light, to_light: &Vector3<f64>, color: [f64; 3]) -> [u8; 3] {
    let len = normal.norm();
    let lambert = if len > 0.0 {
        (normal.dot(to_light) / len).max(0.0)
    } else {
        0.0
    };
    let intensity = (light.ambient + light.diffuse * lambert).clamp(0.0, 1.0);
    color.map(|c| ((c * intensity).clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Z-buffered rasterization of every instance, sampled at pixel centers.
///
/// Depth is the smallest camera-space z among covering triangles; ties keep
/// the triangle drawn first. Triangles crossing the near plane are clipped.
pub fn rasterize(scene: &RenderScene) -> RgbdRender {
    let (width, height) = (scene.intrinsics.width, scene.intrinsics.height);
    let triangles = setup(scene);
    if triangles.is_empty() || width == 0 || height == 0 {
        return RgbdRender::empty(width, height);
    }
    let to_light = -Vector3::from(scene.light.direction);
    let w = width as usize;

    let bands: Vec<(Vec<f64>, Vec<[u8; 3]>)> = (0..height as usize)
        .step_by(BAND_ROWS)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|y0| {
            let y1 = (y0 + BAND_ROWS).min(height as usize);
            let mut zbuf = vec![f64::INFINITY; (y1 - y0) * w];
            let mut color = vec![[0u8; 3]; (y1 - y0) * w];
            for t in &triangles {
                let ys = t.y_range.0.max(y0);
                let ye = t.y_range.1.min(y1 - 1);
                if ys > ye {
                    continue;
                }
                for y in ys..=ye {
                    for x in t.x_range.0..=t.x_range.1 {
                        let c = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                        let wts = [
                            edge(&t.p[1], &t.p[2], &c),
                            edge(&t.p[2], &t.p[0], &c),
                            edge(&t.p[0], &t.p[1], &c),
                        ];
                        let inside = wts
                            .iter()
                            .zip(&t.top_left)
                            .all(|(w, tl)| *w > 0.0 || (*w == 0.0 && *tl));
                        if !inside {
                            continue;
                        }
                        let l = wts.map(|v| v / t.area);
                        let inv_z = l[0] * t.inv_z[0] + l[1] * t.inv_z[1] + l[2] * t.inv_z[2];
                        let z = 1.0 / inv_z;
                        let i = (y - y0) * w + x;
                        if z < zbuf[i] {
                            zbuf[i] = z;
                            let n = (t.n_over_z[0] * l[0] + t.n_over_z[1] * l[1] + t.n_over_z[2] * l[2]) * z;
                            color[i] = shade(&n, &scene.light, &to_light, t.color);
                        }
                    }
                }
            }
            (zbuf, color)
        })
        .collect();

    let mut out = RgbdRender::empty(width, height);
    let mut offset = 0;
    for (zbuf, color) in bands {
        for (i, (z, rgb)) in zbuf.iter().zip(&color).enumerate() {
            if z.is_finite() {
                let idx = offset + i;
                let (x, y) = ((idx % w) as u32, (idx / w) as u32);
                out.depth.set(x, y, *z as f32);
                out.coverage.set(x, y, true);
                out.rgb.put_pixel(x, y, Rgb(*rgb));
            }
        }
        offset += zbuf.len();
    }
    out
}
