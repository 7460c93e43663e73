//! URDF models, forward kinematics, the geometric Jacobian and a
//! damped-least-squares IK solver.

mod model;
mod urdf;

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{Geometry, Joint, JointConfig, JointKind, JointLimits, KinematicModel, Link, Visual};
pub use urdf::{load_urdf, parse_urdf, MeshResolver, MESH_ROOT_ENV};

use crate::geometry::Se3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("malformed URDF: {0}")]
    MalformedXml(String),
    #[error("malformed robot: {0}")]
    Malformed(String),
    #[error("joint `{joint}` has unsupported type `{kind}`")]
    UnsupportedJointType { joint: String, kind: String },
    #[error("kinematic graph has a cycle through link `{0}`")]
    CyclicKinematics(String),
    #[error("link `{0}` is not defined")]
    MissingLink(String),
    #[error("link `{link}` has two parent joints (`{}` and `{}`)", joints.0, joints.1)]
    MultipleParents { link: String, joints: (String, String) },
    #[error("kinematic graph has {} roots ({})", .0.len(), .0.join(", "))]
    DisconnectedTree(Vec<String>),
    #[error("duplicate link name `{0}`")]
    DuplicateName(String),
    #[error("joint `{0}` has lower limit above upper limit")]
    InvalidLimits(String),
    #[error("joint `{0}` has a zero or non-unit axis")]
    InvalidAxis(String),
    #[error("configuration has {got} values, model has {expected} joints")]
    ConfigLengthMismatch { expected: usize, got: usize },
    #[error("no mesh root configured for package `{0}`")]
    UnresolvedPackage(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

/// World (root-frame) pose of every link, indexed like [`KinematicModel::links`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPoses {
    poses: Vec<Se3>,
    joint_frames: Vec<Se3>,
}

impl LinkPoses {
    pub fn get(&self, model: &KinematicModel, link: &str) -> Option<Se3> {
        model.link_id(link).ok().map(|i| self.poses[i])
    }

    pub fn by_index(&self, i: usize) -> Se3 {
        self.poses[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Se3> {
        self.poses.iter()
    }

    pub fn to_map(&self, model: &KinematicModel) -> std::collections::BTreeMap<String, Se3> {
        model
            .links()
            .iter()
            .zip(&self.poses)
            .map(|(l, p)| (l.name.clone(), *p))
            .collect()
    }
}

pub fn forward_kinematics(model: &KinematicModel, q: &JointConfig) -> Result<LinkPoses, KinematicsError> {
    q.check(model)?;
    let mut poses = vec![Se3::identity(); model.links.len()];
    let mut joint_frames = vec![Se3::identity(); model.joints.len()];
    for &j in &model.topo_joints {
        let joint = &model.joints[j];
        let frame = poses[joint.parent].compose(&joint.origin);
        let value = model.dof_index[j].map_or(0.0, |slot| q.values()[slot]);
        poses[joint.child] = frame.compose(&joint.motion(value));
        joint_frames[j] = frame;
    }
    Ok(LinkPoses { poses, joint_frames })
}

pub fn end_effector_pose(model: &KinematicModel, q: &JointConfig) -> Result<Se3, KinematicsError> {
    Ok(forward_kinematics(model, q)?.by_index(model.end_effector_id()))
}

/// Geometric Jacobian of the end effector in the root frame.
///
/// Rows 0..3 are linear velocity, rows 3..6 angular velocity. Columns for
/// joints that do not move the end effector are zero.
pub fn jacobian(model: &KinematicModel, q: &JointConfig) -> Result<DMatrix<f64>, KinematicsError> {
    let fk = forward_kinematics(model, q)?;
    Ok(jacobian_from_poses(model, &fk))
}

fn jacobian_from_poses(model: &KinematicModel, fk: &LinkPoses) -> DMatrix<f64> {
    let ee = fk.poses[model.end_effector_id()].translation;
    let mut jac = DMatrix::zeros(6, model.dof());
    for &slot in model.chain_slots() {
        let j = model.dof_joints[slot];
        let joint = &model.joints[j];
        let frame = &fk.joint_frames[j];
        let axis = frame.transform_vector(&joint.axis);
        let (linear, angular) = match joint.kind {
            JointKind::Revolute => (axis.cross(&(ee - frame.translation)), axis),
            JointKind::Prismatic => (axis, Vector3::zeros()),
            JointKind::Fixed => unreachable!("fixed joints own no slot"),
        };
        jac.fixed_view_mut::<3, 1>(0, slot).copy_from(&linear);
        jac.fixed_view_mut::<3, 1>(3, slot).copy_from(&angular);
    }
    jac
}

/// Damped-least-squares settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IkParams {
    pub damping: f64,
    pub max_iters: usize,
    /// Meters.
    pub pos_tol: f64,
    /// Radians.
    pub rot_tol: f64,
    pub step_scale: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_iters: 200,
            pos_tol: 1e-4,
            rot_tol: 1e-3,
            step_scale: 1.0,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), String> {
        let ok = self.damping > 0.0
            && self.max_iters > 0
            && self.pos_tol > 0.0
            && self.rot_tol > 0.0
            && self.step_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(format!("IK parameters must all be positive: {self:?}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub config: JointConfig,
    pub residual_pos: f64,
    pub residual_rot: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Pose error `[p_target - p; R · log(Rᵀ R_target)]`, both parts in the root frame.
fn pose_error(current: &Se3, target: &Se3) -> Vector6<f64> {
    let dp = target.translation - current.translation;
    let local = current.rotation.transpose() * target.rotation;
    let dr = current.rotation.rotate(local.to_axis_angle().vector());
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Solves for a configuration placing the end effector at `target`.
///
/// Iterates `Δq = s · Jᵀ (J Jᵀ + λ² I)⁻¹ e`, clamping to joint limits after
/// every step, and returns the iterate with the smallest error norm.
/// Unreachable targets are not an error: the result reports
/// `converged = false` together with the residuals.
pub fn solve_ik(
    model: &KinematicModel,
    target: &Se3,
    seed: &JointConfig,
    params: &IkParams,
) -> Result<IkSolution, KinematicsError> {
    seed.check(model)?;
    let mut q = seed.clone();
    q.clamp(model);
    let lambda_sq = params.damping * params.damping;

    let mut best: Option<(f64, IkSolution)> = None;
    for iteration in 0..=params.max_iters {
        let fk = forward_kinematics(model, &q)?;
        let current = fk.poses[model.end_effector_id()];
        let err = pose_error(&current, target);
        let residual_pos = err.fixed_rows::<3>(0).norm();
        let residual_rot = err.fixed_rows::<3>(3).norm();
        let converged = residual_pos <= params.pos_tol && residual_rot <= params.rot_tol;
        let score = err.norm();

        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((
                score,
                IkSolution {
                    config: q.clone(),
                    residual_pos,
                    residual_rot,
                    converged,
                    iterations: iteration,
                },
            ));
        }
        if converged || iteration == params.max_iters {
            break;
        }

        let jac = jacobian_from_poses(model, &fk);
        let jjt: Matrix6<f64> =
            (&jac * jac.transpose()).fixed_view::<6, 6>(0, 0).into_owned() + Matrix6::identity() * lambda_sq;
        let Some(chol) = jjt.cholesky() else { break };
        let y = chol.solve(&err);
        let dq: DVector<f64> = jac.transpose() * DVector::from_column_slice(y.as_slice()) * params.step_scale;
        for (slot, d) in dq.iter().enumerate() {
            q.set(slot, q.values()[slot] + d);
        }
        q.clamp(model);
    }

    Ok(best.map(|(_, s)| s).expect("at least one iterate is evaluated"))
}
