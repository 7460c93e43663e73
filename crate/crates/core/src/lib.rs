//! Replace human hands in egocentric video with a rendered robot arm and
//! derive relative end-effector motion labels.
//!
//! The stages are independent modules: [`retarget`] maps hand keypoints to a
//! gripper pose, [`kinematics`] loads URDF robots and solves IK, [`render`]
//! rasterizes the robot, [`composite`] blends it into the scene by depth,
//! [`labels`] turns gripper trajectories into training targets and [`clips`]
//! parses sub-action annotations. [`pipeline`] wires them together.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clips;
pub mod composite;
pub mod geometry;
pub mod kinematics;
pub mod labels;
pub mod pipeline;
pub mod render;
pub mod retarget;
pub mod synth;

pub use clips::{ClipSpan, TherbligAnnotation};
pub use composite::{blend, CompositeFrame, SceneFrame};
pub use geometry::{AxisAngle, CameraIntrinsics, Rotation3, Se3};
pub use kinematics::{IkParams, IkSolution, JointConfig, KinematicModel};
pub use labels::{LookaheadPolicy, RelPoseLabel, TrajectoryFrame};
pub use pipeline::{ClipBundle, DatasetManifest, PipelineConfig, PipelineError, RunMode};
pub use render::{DepthMap, Light, Mask, Mesh, RgbdRender};
pub use retarget::{GripperPose, HandKeypoints, HandSide};
