//! Software rasterization of robot meshes into RGB-D images.

mod mesh;
mod raster;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

pub use mesh::{
    load_mesh, make_primitive, make_primitive_with, parse_obj, parse_stl, write_stl, Mesh, Primitive, DEFAULT_COLOR,
    DEFAULT_SEGMENTS,
};
pub use raster::{rasterize, Light, MeshInstance, RenderScene, RgbdRender, DEFAULT_NEAR_PLANE};

use crate::geometry::{CameraIntrinsics, Se3};
use crate::kinematics::{Geometry, KinematicModel, KinematicsError, LinkPoses, MeshResolver};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt mesh file: {0}")]
    CorruptFile(String),
    #[error("primitive dimensions must be positive")]
    NonPositiveDimension,
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Row-major float raster.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<f32>) -> Option<Self> {
        (data.len() == width as usize * height as usize).then_some(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: f32) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }
}

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data.len() == other.data.len() && self.data.iter().zip(&other.data).all(|(a, b)| !a || *b)
    }
}

struct LinkVisual {
    link: usize,
    origin: Se3,
    mesh: Arc<Mesh>,
}

/// Tessellated visual geometry of every link, loaded once per model.
pub struct RobotMeshes {
    visuals: Vec<LinkVisual>,
}

impl RobotMeshes {
    pub fn load(model: &KinematicModel, resolver: &MeshResolver, default_color: [f64; 3]) -> Result<Self, RenderError> {
        let mut cache: HashMap<PathBuf, Arc<Mesh>> = HashMap::new();
        let mut visuals = Vec::new();
        for (link, l) in model.links().iter().enumerate() {
            for v in &l.visuals {
                let color = v.color.unwrap_or(default_color);
                let mesh = match &v.geometry {
                    Geometry::Mesh { filename, scale } => {
                        let path = resolver.resolve(filename, model.source_dir())?;
                        let base = match cache.get(&path) {
                            Some(m) => m.clone(),
                            None => {
                                let m = Arc::new(load_mesh(&path)?);
                                cache.insert(path, m.clone());
                                m
                            }
                        };
                        (*base).clone().scaled(scale).with_color(color)
                    }
                    Geometry::Box { size } => make_primitive(Primitive::Box { size: *size })?.with_color(color),
                    Geometry::Cylinder { radius, length } => make_primitive(Primitive::Cylinder {
                        radius: *radius,
                        length: *length,
                    })?
                    .with_color(color),
                    Geometry::Sphere { radius } => {
                        make_primitive(Primitive::Sphere { radius: *radius })?.with_color(color)
                    }
                };
                visuals.push(LinkVisual {
                    link,
                    origin: v.origin,
                    mesh: Arc::new(mesh),
                });
            }
        }
        Ok(Self { visuals })
    }

    pub fn len(&self) -> usize {
        self.visuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visuals.is_empty()
    }

    /// Places every visual given link poses and the root's pose in the camera frame.
    pub fn scene(
        &self,
        poses: &LinkPoses,
        camera_from_root: &Se3,
        intrinsics: CameraIntrinsics,
        light: Light,
    ) -> RenderScene {
        let mut scene = RenderScene::new(intrinsics);
        scene.light = light;
        for v in &self.visuals {
            let pose = camera_from_root.compose(&poses.by_index(v.link)).compose(&v.origin);
            scene.push(v.mesh.clone(), pose);
        }
        scene
    }
}
