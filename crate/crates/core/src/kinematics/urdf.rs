//! The URDF subset understood by [`parse_urdf`].
//!
//! Supported: `<link>` with `<visual>` (origin, mesh/box/cylinder/sphere
//! geometry, inline material color) and `<joint>` of type `revolute`,
//! `continuous`, `prismatic` or `fixed` with origin, axis and limits.
//! Continuous joints become revolute joints limited to ±2π. Collision,
//! inertial, transmission and gazebo elements are ignored.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use roxmltree::{Document, Node};

use super::model::{Geometry, Joint, JointKind, JointLimits, KinematicModel, Link, Visual};
use super::KinematicsError;
use crate::geometry::{Rotation3, Se3};

pub fn parse_urdf(text: &str) -> Result<KinematicModel, KinematicsError> {
    let doc = Document::parse(text).map_err(|e| KinematicsError::MalformedXml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(KinematicsError::MalformedXml(format!(
            "root element is <{}>, expected <robot>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or_default().to_string();
    let materials = named_materials(robot)?;

    let mut links = Vec::new();
    for node in robot.children().filter(|n| n.has_tag_name("link")) {
        links.push(parse_link(node, &materials)?);
    }
    let index: HashMap<&str, usize> = links.iter().enumerate().map(|(i, l)| (l.name.as_str(), i)).collect();

    let mut joints = Vec::new();
    for node in robot.children().filter(|n| n.has_tag_name("joint")) {
        joints.push(parse_joint(node, &index)?);
    }
    KinematicModel::new(name, links, joints)
}

/// Reads a URDF file and remembers its directory for mesh resolution.
pub fn load_urdf(path: &Path) -> Result<KinematicModel, KinematicsError> {
    let text = std::fs::read_to_string(path).map_err(|e| KinematicsError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut model = parse_urdf(&text)?;
    model.set_source_dir(path.parent().map(Path::to_path_buf).unwrap_or_default());
    Ok(model)
}

fn required<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str, KinematicsError> {
    node.attribute(attr).ok_or_else(|| {
        KinematicsError::MalformedXml(format!("<{}> is missing attribute `{attr}`", node.tag_name().name()))
    })
}

fn numbers<const N: usize>(text: &str, what: &str) -> Result<[f64; N], KinematicsError> {
    let parsed: Result<Vec<f64>, _> = text.split_whitespace().map(str::parse::<f64>).collect();
    match parsed {
        Ok(v) if v.len() == N && v.iter().all(|x| x.is_finite()) => {
            let mut out = [0.0; N];
            out.copy_from_slice(&v);
            Ok(out)
        }
        _ => Err(KinematicsError::MalformedXml(format!(
            "`{what}` must hold {N} finite numbers, got `{text}`"
        ))),
    }
}

fn number(node: Node, attr: &str) -> Result<f64, KinematicsError> {
    Ok(numbers::<1>(required(node, attr)?, attr)?[0])
}

fn parse_origin(parent: Node) -> Result<Se3, KinematicsError> {
    let Some(origin) = parent.children().find(|n| n.has_tag_name("origin")) else {
        return Ok(Se3::identity());
    };
    let xyz = origin.attribute("xyz").map(|t| numbers::<3>(t, "xyz")).transpose()?;
    let rpy = origin.attribute("rpy").map(|t| numbers::<3>(t, "rpy")).transpose()?;
    let [x, y, z] = xyz.unwrap_or_default();
    let [roll, pitch, yaw] = rpy.unwrap_or_default();
    Ok(Se3::new(Rotation3::from_rpy(roll, pitch, yaw), Vector3::new(x, y, z)))
}

fn parse_color(material: Node) -> Result<Option<[f64; 3]>, KinematicsError> {
    match material.children().find(|n| n.has_tag_name("color")) {
        Some(color) => {
            let [r, g, b, _a] = numbers::<4>(required(color, "rgba")?, "rgba")?;
            Ok(Some([r, g, b]))
        }
        None => Ok(None),
    }
}

fn named_materials(robot: Node) -> Result<HashMap<String, [f64; 3]>, KinematicsError> {
    let mut out = HashMap::new();
    for m in robot.children().filter(|n| n.has_tag_name("material")) {
        if let (Some(name), Some(color)) = (m.attribute("name"), parse_color(m)?) {
            out.insert(name.to_string(), color);
        }
    }
    Ok(out)
}

fn parse_geometry(visual: Node) -> Result<Geometry, KinematicsError> {
    let geometry = visual
        .children()
        .find(|n| n.has_tag_name("geometry"))
        .ok_or_else(|| KinematicsError::MalformedXml("<visual> without <geometry>".into()))?;
    let shape = geometry
        .children()
        .find(Node::is_element)
        .ok_or_else(|| KinematicsError::MalformedXml("empty <geometry>".into()))?;
    let g = match shape.tag_name().name() {
        "mesh" => Geometry::Mesh {
            filename: required(shape, "filename")?.to_string(),
            scale: match shape.attribute("scale") {
                Some(s) => Vector3::from(numbers::<3>(s, "scale")?),
                None => Vector3::repeat(1.0),
            },
        },
        "box" => Geometry::Box {
            size: Vector3::from(numbers::<3>(required(shape, "size")?, "size")?),
        },
        "cylinder" => Geometry::Cylinder {
            radius: number(shape, "radius")?,
            length: number(shape, "length")?,
        },
        "sphere" => Geometry::Sphere {
            radius: number(shape, "radius")?,
        },
        other => return Err(KinematicsError::MalformedXml(format!("unsupported geometry <{other}>"))),
    };
    Ok(g)
}

fn parse_link(node: Node, materials: &HashMap<String, [f64; 3]>) -> Result<Link, KinematicsError> {
    let name = required(node, "name")?.to_string();
    let mut visuals = Vec::new();
    for v in node.children().filter(|n| n.has_tag_name("visual")) {
        let color = match v.children().find(|n| n.has_tag_name("material")) {
            Some(m) => match parse_color(m)? {
                Some(c) => Some(c),
                None => m.attribute("name").and_then(|n| materials.get(n).copied()),
            },
            None => None,
        };
        visuals.push(Visual {
            origin: parse_origin(v)?,
            geometry: parse_geometry(v)?,
            color,
        });
    }
    Ok(Link { name, visuals })
}

fn parse_joint(node: Node, index: &HashMap<&str, usize>) -> Result<Joint, KinematicsError> {
    let name = required(node, "name")?.to_string();
    let kind_text = required(node, "type")?;
    let kind = match kind_text {
        "revolute" | "continuous" => JointKind::Revolute,
        "prismatic" => JointKind::Prismatic,
        "fixed" => JointKind::Fixed,
        other => {
            return Err(KinematicsError::UnsupportedJointType {
                joint: name,
                kind: other.to_string(),
            })
        }
    };

    let link_ref = |tag: &str| -> Result<usize, KinematicsError> {
        let el = node
            .children()
            .find(|n| n.has_tag_name(tag))
            .ok_or_else(|| KinematicsError::MalformedXml(format!("joint `{name}` has no <{tag}>")))?;
        let link = required(el, "link")?;
        index
            .get(link)
            .copied()
            .ok_or_else(|| KinematicsError::MissingLink(link.to_string()))
    };
    let parent = link_ref("parent")?;
    let child = link_ref("child")?;

    let axis = match node.children().find(|n| n.has_tag_name("axis")) {
        Some(a) => Vector3::from(numbers::<3>(required(a, "xyz")?, "axis")?),
        None => Vector3::x(),
    };
    let norm = axis.norm();
    if kind != JointKind::Fixed && norm < 1e-9 {
        return Err(KinematicsError::InvalidAxis(name));
    }
    let axis = if norm > 0.0 { axis / norm } else { Vector3::x() };

    let limits = if kind_text == "continuous" {
        JointLimits {
            lower: -TAU,
            upper: TAU,
        }
    } else {
        match node.children().find(|n| n.has_tag_name("limit")) {
            Some(l) if kind != JointKind::Fixed => JointLimits {
                lower: l
                    .attribute("lower")
                    .map(|_| number(l, "lower"))
                    .transpose()?
                    .unwrap_or(0.0),
                upper: l
                    .attribute("upper")
                    .map(|_| number(l, "upper"))
                    .transpose()?
                    .unwrap_or(0.0),
            },
            _ => JointLimits::unbounded(),
        }
    };

    Ok(Joint {
        name,
        kind,
        parent,
        child,
        origin: parse_origin(node)?,
        axis,
        limits,
    })
}

/// Maps URDF mesh filenames to files on disk.
///
/// `package://<pkg>/<rest>` uses the configured root for `<pkg>`, falling
/// back to `$EMBODISWAP_MESH_ROOT/<pkg>/<rest>`. `file://` prefixes are
/// stripped. Relative paths resolve against the URDF's directory.
#[derive(Debug, Clone, Default)]
pub struct MeshResolver {
    pub package_roots: HashMap<String, PathBuf>,
    pub fallback_root: Option<PathBuf>,
}

pub const MESH_ROOT_ENV: &str = "EMBODISWAP_MESH_ROOT";

impl MeshResolver {
    pub fn new(package_roots: HashMap<String, PathBuf>) -> Self {
        Self {
            package_roots,
            fallback_root: None,
        }
    }

    /// Reads the fallback root from `EMBODISWAP_MESH_ROOT`.
    pub fn with_env_fallback(mut self) -> Self {
        self.fallback_root = std::env::var_os(MESH_ROOT_ENV).map(PathBuf::from);
        self
    }

    pub fn resolve(&self, filename: &str, urdf_dir: Option<&Path>) -> Result<PathBuf, KinematicsError> {
        if let Some(rest) = filename.strip_prefix("package://") {
            let (pkg, tail) = rest.split_once('/').unwrap_or((rest, ""));
            if let Some(root) = self.package_roots.get(pkg) {
                return Ok(root.join(tail));
            }
            if let Some(root) = &self.fallback_root {
                return Ok(root.join(pkg).join(tail));
            }
            return Err(KinematicsError::UnresolvedPackage(pkg.to_string()));
        }
        let path = Path::new(filename.strip_prefix("file://").unwrap_or(filename));
        if path.is_absolute() {
            Ok(path.to_path_buf())
        } else {
            Ok(urdf_dir.unwrap_or(Path::new(".")).join(path))
        }
    }
}
