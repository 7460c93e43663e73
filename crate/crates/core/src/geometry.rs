//! Rigid transforms, rotation encodings and the pinhole camera model.
//!
//! # Camera convention
//!
//! Every camera-frame quantity in this crate uses the computer-vision
//! convention: **+Z points forward** along the optical axis, **+X right**
//! and **+Y down** in the image. Depth maps, intrinsics, hand keypoints
//! and gripper poses all share this frame. Feeding poses from an
//! OpenGL-style (+Y up, -Z forward) source without converting them first
//! silently mirrors every retargeted gripper.
//!
//! Rotations are stored as matrices. Axis-angle vectors only appear at
//! serialization boundaries (labels, CLI input).

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `RᵀR - I` (max entry) and on `det(R) - 1`.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Points closer than this to the camera plane cannot be projected.
pub const MIN_PROJECTION_DEPTH: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point at depth {0} is behind or on the camera plane")]
    NonPositiveDepth(f64),
    #[error("matrix is not a proper rotation (orthonormality error {ortho:.3e}, det {det})")]
    NotARotation { ortho: f64, det: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("bottom row of a homogeneous transform must be [0, 0, 0, 1]")]
    NotHomogeneous,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Skew-symmetric matrix `[v]×` such that `[v]× w = v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// A proper rotation matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and determinant against [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("rotation"));
        }
        let ortho = orthonormality_error(&m);
        let det = m.determinant();
        if ortho > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(GeometryError::NotARotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller already knows to be a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Builds a rotation from its three column vectors.
    pub fn from_columns(x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_columns(&[x, y, z]))
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// URDF fixed-axis roll/pitch/yaw: `Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::about_z(yaw) * Self::about_y(pitch) * Self::about_x(roll)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> Vector3<f64> {
        self.0.column(i).into_owned()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Inverse rotation (the transpose).
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    pub fn to_axis_angle(&self) -> AxisAngle {
        rotation_to_axis_angle(self)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        self.to_axis_angle().angle()
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;

    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

impl fmt::Debug for Rotation3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Rotation3").field(&self.0.as_slice()).finish()
    }
}

fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).amax()
}

/// Rotation vector: unit axis scaled by the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AxisAngle(pub Vector3<f64>);

impl AxisAngle {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn to_rotation(&self) -> Rotation3 {
        axis_angle_to_rotation(self)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }
}

/// Rodrigues' formula. Uses Taylor coefficients below 1e-6 rad.
pub fn axis_angle_to_rotation(v: &AxisAngle) -> Rotation3 {
    let theta_sq = v.0.norm_squared();
    let theta = theta_sq.sqrt();
    let (a, b) = if theta < 1e-6 {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    let k = skew(&v.0);
    Rotation3(Matrix3::identity() + k * a + k * k * b)
}

/// Inverse of [`axis_angle_to_rotation`]; the returned angle lies in `[0, π]`.
///
/// Close to a half turn the axis is read from the symmetric part of the
/// matrix, where the antisymmetric part has vanished.
pub fn rotation_to_axis_angle(r: &Rotation3) -> AxisAngle {
    let m = &r.0;
    let trace = m.trace();
    let cos = ((trace - 1.0) * 0.5).clamp(-1.0, 1.0);
    // w = sin(θ)·axis
    let w = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
    let sin = w.norm();
    let theta = sin.atan2(cos);

    if trace < -1.0 + 1e-6 {
        // symmetric part = cos·I + (1 - cos)·n nᵀ
        let sym = (m + m.transpose()) * 0.5;
        let outer = (sym - Matrix3::identity() * cos) / (1.0 - cos);
        let k = (0..3)
            .max_by(|&i, &j| outer[(i, i)].total_cmp(&outer[(j, j)]))
            .unwrap_or(0);
        let mut axis = outer.column(k).into_owned() / outer[(k, k)].max(0.0).sqrt();
        axis /= axis.norm();
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        return AxisAngle(axis * theta);
    }

    let scale = if sin < 1e-7 {
        // θ / sin θ ≈ 1 + θ²/6
        1.0 + theta * theta / 6.0
    } else {
        theta / sin
    };
    AxisAngle(w * scale)
}

/// Rigid transform `x ↦ R x + t`.
#[derive(Clone, Copy, PartialEq)]
pub struct Se3 {
    pub rotation: Rotation3,
    pub translation: Vector3<f64>,
}

impl Se3 {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), t)
    }

    pub fn from_rotation(r: Rotation3) -> Self {
        Self::new(r, Vector3::zeros())
    }

    /// `self · other`: applies `other` first.
    pub fn compose(&self, other: &Se3) -> Se3 {
        Se3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Se3 {
        let rt = self.rotation.transpose();
        Se3 {
            rotation: rt,
            translation: -rt.rotate(&self.translation),
        }
    }

    /// `self⁻¹ · other`: `other` expressed in this transform's frame.
    pub fn relative(&self, other: &Se3) -> Se3 {
        self.inverse().compose(other)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(v)
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// The 4×4 homogeneous matrix, row-major.
    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = m[(r, c)];
            }
        }
        out
    }

    /// Parses a row-major 4×4 homogeneous matrix, validating the rotation block.
    pub fn from_row_major(values: &[f64; 16]) -> Result<Se3, GeometryError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("transform"));
        }
        let bottom = &values[12..16];
        if bottom[0] != 0.0 || bottom[1] != 0.0 || bottom[2] != 0.0 || bottom[3] != 1.0 {
            return Err(GeometryError::NotHomogeneous);
        }
        let rot = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9], values[10],
        );
        Ok(Se3 {
            rotation: Rotation3::from_matrix(rot)?,
            translation: Vector3::new(values[3], values[7], values[11]),
        })
    }

    /// Translation distance and rotation angle between two transforms.
    pub fn distance(&self, other: &Se3) -> (f64, f64) {
        let rel = self.relative(other);
        ((self.translation - other.translation).norm(), rel.rotation.angle())
    }
}

impl Mul for Se3 {
    type Output = Se3;

    fn mul(self, rhs: Se3) -> Se3 {
        self.compose(&rhs)
    }
}

impl fmt::Debug for Se3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Se3")
            .field("rotation", &self.rotation)
            .field(
                "translation",
                &[self.translation.x, self.translation.y, self.translation.z],
            )
            .finish()
    }
}

impl Serialize for Se3 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Se3 {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = <[f64; 16]>::deserialize(deserializer)?;
        Se3::from_row_major(&values).map_err(serde::de::Error::custom)
    }
}

pub fn se3_compose(a: &Se3, b: &Se3) -> Se3 {
    a.compose(b)
}

pub fn se3_inverse(a: &Se3) -> Se3 {
    a.inverse()
}

pub fn se3_relative(a: &Se3, b: &Se3) -> Se3 {
    a.relative(b)
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// Pixel coordinates plus camera-space depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    pub depth: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::NonFinite("intrinsics"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn project(&self, p: &Vector3<f64>) -> Result<Projection, GeometryError> {
        if !(p.z > MIN_PROJECTION_DEPTH) {
            return Err(GeometryError::NonPositiveDepth(p.z));
        }
        Ok(Projection {
            pixel: Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy),
            depth: p.z,
        })
    }

    pub fn unproject(&self, pixel: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx * depth,
            (pixel.y - self.cy) / self.fy * depth,
            depth,
        )
    }

    /// Direction of the ray through `pixel`, scaled so that its z component is 1.
    pub fn ray_direction(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy, 1.0)
    }
}

pub fn project(k: &CameraIntrinsics, p: &Vector3<f64>) -> Result<Projection, GeometryError> {
    k.project(p)
}
