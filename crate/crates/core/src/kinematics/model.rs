use std::collections::HashMap;
use std::path::PathBuf;

use nalgebra::Vector3;

use super::KinematicsError;
use crate::geometry::{AxisAngle, Se3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimits {
    pub fn unbounded() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    /// Midpoint of a finite range, otherwise zero clamped into range.
    pub fn midpoint(&self) -> f64 {
        if self.lower.is_finite() && self.upper.is_finite() {
            0.5 * (self.lower + self.upper)
        } else {
            self.clamp(0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Mesh filename as written in the URDF; see [`super::MeshResolver`].
    Mesh {
        filename: String,
        scale: Vector3<f64>,
    },
    Box {
        size: Vector3<f64>,
    },
    Cylinder {
        radius: f64,
        length: f64,
    },
    Sphere {
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visual {
    /// Pose of the geometry in the link frame.
    pub origin: Se3,
    pub geometry: Geometry,
    /// Linear RGB from an inline `<material><color>`, if present.
    pub color: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub visuals: Vec<Visual>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    /// Pose of the joint frame in the parent link frame.
    pub origin: Se3,
    /// Unit axis in the joint frame.
    pub axis: Vector3<f64>,
    pub limits: JointLimits,
}

impl Joint {
    /// Transform contributed by the joint variable alone.
    pub fn motion(&self, q: f64) -> Se3 {
        match self.kind {
            JointKind::Revolute => Se3::from_rotation(AxisAngle(self.axis * q).to_rotation()),
            JointKind::Prismatic => Se3::from_translation(self.axis * q),
            JointKind::Fixed => Se3::identity(),
        }
    }
}

/// An immutable kinematic tree.
///
/// Joint variables are ordered by the document order of the non-fixed joints.
#[derive(Debug, Clone)]
pub struct KinematicModel {
    pub(crate) name: String,
    pub(crate) links: Vec<Link>,
    pub(crate) joints: Vec<Joint>,
    pub(crate) root: usize,
    pub(crate) end_effector: usize,
    /// Joint whose child is the link, per link.
    pub(crate) parent_joint: Vec<Option<usize>>,
    /// Joint indices sorted so that parents precede children.
    pub(crate) topo_joints: Vec<usize>,
    /// Joint index for each configuration slot.
    pub(crate) dof_joints: Vec<usize>,
    /// Configuration slot for each joint, `None` for fixed joints.
    pub(crate) dof_index: Vec<Option<usize>>,
    /// Configuration slots on the root to end-effector path, root first.
    pub(crate) chain: Vec<usize>,
    pub(crate) link_index: HashMap<String, usize>,
    pub(crate) source_dir: Option<PathBuf>,
}

impl KinematicModel {
    /// Builds and validates a model from its parts.
    ///
    /// The end effector defaults to the deepest leaf link, ties broken by
    /// document order.
    pub fn new(name: String, links: Vec<Link>, joints: Vec<Joint>) -> Result<Self, KinematicsError> {
        let mut link_index = HashMap::with_capacity(links.len());
        for (i, link) in links.iter().enumerate() {
            if link_index.insert(link.name.clone(), i).is_some() {
                return Err(KinematicsError::DuplicateName(link.name.clone()));
            }
        }
        if links.is_empty() {
            return Err(KinematicsError::Malformed("robot has no links".into()));
        }

        let mut parent_joint = vec![None; links.len()];
        for (j, joint) in joints.iter().enumerate() {
            if let Some(prev) = parent_joint[joint.child].replace(j) {
                return Err(KinematicsError::MultipleParents {
                    link: links[joint.child].name.clone(),
                    joints: (joints[prev].name.clone(), joint.name.clone()),
                });
            }
            if joint.kind != JointKind::Fixed && joint.limits.lower > joint.limits.upper {
                return Err(KinematicsError::InvalidLimits(joint.name.clone()));
            }
            if (joint.axis.norm() - 1.0).abs() > 1e-6 {
                return Err(KinematicsError::InvalidAxis(joint.name.clone()));
            }
        }

        // Walking parents from every link must terminate within |links| steps.
        for start in 0..links.len() {
            let mut link = start;
            let mut steps = 0;
            while let Some(j) = parent_joint[link] {
                link = joints[j].parent;
                steps += 1;
                if steps > links.len() {
                    return Err(KinematicsError::CyclicKinematics(links[start].name.clone()));
                }
            }
        }

        let roots: Vec<usize> = (0..links.len()).filter(|&l| parent_joint[l].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            _ => {
                return Err(KinematicsError::DisconnectedTree(
                    roots.iter().map(|&r| links[r].name.clone()).collect(),
                ))
            }
        };

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (j, joint) in joints.iter().enumerate() {
            children[joint.parent].push(j);
        }
        let mut topo_joints = Vec::with_capacity(joints.len());
        let mut depth = vec![0usize; links.len()];
        let mut stack = vec![root];
        while let Some(link) = stack.pop() {
            for &j in children[link].iter().rev() {
                topo_joints.push(j);
                depth[joints[j].child] = depth[link] + 1;
                stack.push(joints[j].child);
            }
        }

        let mut dof_joints = Vec::new();
        let mut dof_index = vec![None; joints.len()];
        for (j, joint) in joints.iter().enumerate() {
            if joint.kind != JointKind::Fixed {
                dof_index[j] = Some(dof_joints.len());
                dof_joints.push(j);
            }
        }

        let end_effector = (0..links.len())
            .filter(|&l| children[l].is_empty())
            .fold(root, |best, l| if depth[l] > depth[best] { l } else { best });

        let mut model = Self {
            name,
            links,
            joints,
            root,
            end_effector,
            parent_joint,
            topo_joints,
            dof_joints,
            dof_index,
            chain: Vec::new(),
            link_index,
            source_dir: None,
        };
        model.chain = model.chain_to(end_effector);
        Ok(model)
    }

    /// Returns a copy with a different end-effector link.
    pub fn with_end_effector(mut self, link: &str) -> Result<Self, KinematicsError> {
        let idx = self.link_id(link)?;
        self.end_effector = idx;
        self.chain = self.chain_to(idx);
        Ok(self)
    }

    fn chain_to(&self, link: usize) -> Vec<usize> {
        let mut chain = Vec::new();
        let mut cur = link;
        while let Some(j) = self.parent_joint[cur] {
            if let Some(slot) = self.dof_index[j] {
                chain.push(slot);
            }
            cur = self.joints[j].parent;
        }
        chain.reverse();
        chain
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn root(&self) -> &Link {
        &self.links[self.root]
    }

    pub fn end_effector(&self) -> &Link {
        &self.links[self.end_effector]
    }

    pub(crate) fn end_effector_id(&self) -> usize {
        self.end_effector
    }

    pub fn link_id(&self, name: &str) -> Result<usize, KinematicsError> {
        self.link_index
            .get(name)
            .copied()
            .ok_or_else(|| KinematicsError::MissingLink(name.to_string()))
    }

    /// Number of joint variables.
    pub fn dof(&self) -> usize {
        self.dof_joints.len()
    }

    /// Joints that own a configuration slot, in slot order.
    pub fn dof_joints(&self) -> impl Iterator<Item = &Joint> {
        self.dof_joints.iter().map(|&j| &self.joints[j])
    }

    /// Slot of the named joint, `None` for fixed or unknown joints.
    pub fn dof_slot(&self, joint: &str) -> Option<usize> {
        self.joints
            .iter()
            .position(|j| j.name == joint)
            .and_then(|j| self.dof_index[j])
    }

    /// Configuration slots that move the end effector, root first.
    pub fn chain_slots(&self) -> &[usize] {
        &self.chain
    }

    pub fn limits(&self) -> Vec<JointLimits> {
        self.dof_joints().map(|j| j.limits).collect()
    }

    /// Directory the model was loaded from, used to resolve relative mesh paths.
    pub fn source_dir(&self) -> Option<&std::path::Path> {
        self.source_dir.as_deref()
    }

    pub(crate) fn set_source_dir(&mut self, dir: PathBuf) {
        self.source_dir = Some(dir);
    }
}

/// Joint variable values in the model's slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    values: Vec<f64>,
}

impl JointConfig {
    pub fn new(model: &KinematicModel, values: Vec<f64>) -> Result<Self, KinematicsError> {
        if values.len() != model.dof() {
            return Err(KinematicsError::ConfigLengthMismatch {
                expected: model.dof(),
                got: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn zeros(model: &KinematicModel) -> Self {
        Self {
            values: vec![0.0; model.dof()],
        }
    }

    /// Every joint at the midpoint of its range.
    pub fn midpoint(model: &KinematicModel) -> Self {
        Self {
            values: model.dof_joints().map(|j| j.limits.midpoint()).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn set(&mut self, slot: usize, value: f64) {
        self.values[slot] = value;
    }

    /// Clamps into the model's limits, reporting whether anything moved.
    pub fn clamp(&mut self, model: &KinematicModel) -> bool {
        let mut clamped = false;
        for (v, joint) in self.values.iter_mut().zip(model.dof_joints()) {
            let c = joint.limits.clamp(*v);
            clamped |= c != *v;
            *v = c;
        }
        clamped
    }

    pub fn within_limits(&self, model: &KinematicModel) -> bool {
        self.values
            .iter()
            .zip(model.dof_joints())
            .all(|(v, j)| j.limits.contains(*v))
    }

    pub(crate) fn check(&self, model: &KinematicModel) -> Result<(), KinematicsError> {
        if self.values.len() != model.dof() {
            return Err(KinematicsError::ConfigLengthMismatch {
                expected: model.dof(),
                got: self.values.len(),
            });
        }
        Ok(())
    }
}
