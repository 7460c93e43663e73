//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! urdf = "robot/arm.urdf"          # relative paths resolve against this file
//! end_effector = "tool0"
//! output_dir = "out"
//! parallelism = 4                  # clips processed concurrently
//! depth_bias = 0.0                 # meters subtracted from robot depth when blending
//!
//! [mesh_roots]                     # package://<name>/... lookups
//! arm_description = "robot"
//!
//! [robot]
//! base_pose = [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]   # world_from_base, row-major
//! color = [0.7, 0.7, 0.72]
//! [robot.joint_values]             # initial values; joints off the arm chain keep them
//! finger_joint = 0.02
//!
//! [ik]
//! damping = 0.05
//! max_iters = 200
//! pos_tol = 1e-4
//! rot_tol = 1e-3
//! step_scale = 1.0
//! max_residual_pos = 0.005         # frames above this are excluded
//!
//! [lookahead]                      # merged over open/close/cut = 8, pour/place = 16
//! stir = 12
//!
//! [light]
//! direction = [0.0, 0.0, 1.0]
//! ambient = 0.35
//! diffuse = 0.65
//!
//! [render]
//! near_plane = 0.01
//! ```
//!
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::geometry::Se3;
use crate::kinematics::IkParams;
use crate::labels::LookaheadPolicy;
use crate::render::{Light, DEFAULT_COLOR, DEFAULT_NEAR_PLANE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotConfig {
    /// Robot root in the world frame.
    pub base_pose: Se3,
    pub color: [f64; 3],
    pub joint_values: BTreeMap<String, f64>,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            base_pose: Se3::identity(),
            color: DEFAULT_COLOR,
            joint_values: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IkConfig {
    pub damping: f64,
    pub max_iters: usize,
    pub pos_tol: f64,
    pub rot_tol: f64,
    pub step_scale: f64,
    /// Meters.
    pub max_residual_pos: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        let p = IkParams::default();
        Self {
            damping: p.damping,
            max_iters: p.max_iters,
            pos_tol: p.pos_tol,
            rot_tol: p.rot_tol,
            step_scale: p.step_scale,
            max_residual_pos: 0.005,
        }
    }
}

impl IkConfig {
    pub fn params(&self) -> IkParams {
        IkParams {
            damping: self.damping,
            max_iters: self.max_iters,
            pos_tol: self.pos_tol,
            rot_tol: self.rot_tol,
            step_scale: self.step_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub near_plane: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            near_plane: DEFAULT_NEAR_PLANE,
        }
    }
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub urdf: PathBuf,
    pub end_effector: String,
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub depth_bias: f64,
    #[serde(default)]
    pub mesh_roots: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub robot: RobotConfig,
    #[serde(default)]
    pub ik: IkConfig,
    #[serde(default)]
    pub lookahead: BTreeMap<String, u32>,
    #[serde(default)]
    pub light: Light,
    #[serde(default)]
    pub render: RenderConfig,
    /// SHA-256 of the source text, hex.
    #[serde(skip)]
    pub digest: String,
}

impl PipelineConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        let absolutize = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        absolutize(&mut cfg.urdf);
        absolutize(&mut cfg.output_dir);
        for root in cfg.mesh_roots.values_mut() {
            absolutize(root);
        }
        cfg.digest = hex_digest(text.as_bytes());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let invalid = |m: String| Err(PipelineError::ConfigInvalid(m));
        if self.end_effector.is_empty() {
            return invalid("end_effector must name a link".into());
        }
        if self.parallelism == 0 {
            return invalid("parallelism must be at least 1".into());
        }
        if !(self.depth_bias.is_finite() && self.depth_bias >= 0.0) {
            return invalid(format!(
                "depth_bias must be a non-negative number, got {}",
                self.depth_bias
            ));
        }
        self.ik.params().validate().or_else(invalid)?;
        if !(self.ik.max_residual_pos > 0.0) {
            return invalid("ik.max_residual_pos must be positive".into());
        }
        self.lookahead_policy().validate().or_else(|e| invalid(e.to_string()))?;
        self.light.validate().or_else(invalid)?;
        if !(self.render.near_plane > 0.0) {
            return invalid("render.near_plane must be positive".into());
        }
        if self.robot.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return invalid("robot.color components must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Built-in defaults overridden by the `[lookahead]` table.
    pub fn lookahead_policy(&self) -> LookaheadPolicy {
        let mut policy = LookaheadPolicy::default();
        policy.0.extend(self.lookahead.iter().map(|(k, v)| (k.clone(), *v)));
        policy
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
