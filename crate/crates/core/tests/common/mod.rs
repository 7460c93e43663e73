//! Random generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::fmt::Write;
use std::path::PathBuf;

use nalgebra::{DMatrix, Vector2, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use embodiswap::geometry::{AxisAngle, CameraIntrinsics, Rotation3, Se3};
use embodiswap::kinematics::{end_effector_pose, parse_urdf, JointConfig, KinematicModel};
use embodiswap::retarget::{gripper_axes, HandKeypoints, HandSide};
use embodiswap::synth::canonical_keypoints;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotation with a uniformly random axis and an angle in `[0, max_angle)`.
pub fn rotation(rng: &mut impl Rng, max_angle: f64) -> Rotation3 {
    AxisAngle(unit_vector(rng) * rng.gen_range(0.0..max_angle)).to_rotation()
}

pub fn se3(rng: &mut impl Rng, max_translation: f64) -> Se3 {
    let t = Vector3::new(
        rng.gen_range(-max_translation..max_translation),
        rng.gen_range(-max_translation..max_translation),
        rng.gen_range(-max_translation..max_translation),
    );
    Se3::new(rotation(rng, PI), t)
}

/// A plausible hand: the canonical palm, randomly scaled and jittered, placed
/// 0.3 to 1 m in front of the camera. Mirrored for left hands.
pub fn hand(rng: &mut impl Rng, side: HandSide) -> HandKeypoints {
    loop {
        let scale = rng.gen_range(0.7..1.3);
        let mirror = if side == HandSide::Left { -1.0 } else { 1.0 };
        let mut pts = canonical_keypoints();
        for p in &mut pts {
            let jitter = Vector3::new(
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.01..0.01),
            );
            *p = Vector3::new(p.x, p.y * mirror, p.z) * scale + jitter;
        }
        let placement = Se3::new(
            rotation(rng, PI),
            Vector3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(0.3..1.0),
            ),
        );
        let pts = pts.map(|p| placement.transform_point(&p));
        if let Ok(kp) = HandKeypoints::new(pts, side) {
            if gripper_axes(&kp).is_ok() {
                return kp;
            }
        }
    }
}

/// URDF of a serial chain with `n` movable joints (revolute or prismatic,
/// random axes and origins) ending in a fixed `tool` link.
pub fn chain_urdf(rng: &mut impl Rng, n: usize) -> String {
    let mut s = String::from("<robot name=\"random\">\n<link name=\"l0\"/>\n");
    for i in 1..=n {
        writeln!(s, "<link name=\"l{i}\"/>").unwrap();
    }
    s.push_str("<link name=\"tool\"/>\n");
    for i in 1..=n {
        let prismatic = rng.gen_bool(0.25);
        let axis = unit_vector(rng);
        let (kind, limit) = if prismatic {
            ("prismatic", 0.5)
        } else {
            ("revolute", PI)
        };
        writeln!(
            s,
            "<joint name=\"j{i}\" type=\"{kind}\"><parent link=\"l{}\"/><child link=\"l{i}\"/>\
             <origin xyz=\"{} {} {}\" rpy=\"{} {} {}\"/><axis xyz=\"{} {} {}\"/>\
             <limit lower=\"-{limit}\" upper=\"{limit}\" effort=\"1\" velocity=\"1\"/></joint>",
            i - 1,
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(0.0..0.4),
            rng.gen_range(-PI..PI),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-PI..PI),
            axis.x,
            axis.y,
            axis.z,
        )
        .unwrap();
    }
    writeln!(
        s,
        "<joint name=\"flange\" type=\"fixed\"><parent link=\"l{n}\"/><child link=\"tool\"/>\
         <origin xyz=\"0.05 0.02 0.1\"/></joint>\n</robot>"
    )
    .unwrap();
    s
}

pub fn chain(rng: &mut impl Rng, n: usize) -> KinematicModel {
    parse_urdf(&chain_urdf(rng, n)).expect("generated chain parses")
}

/// Uniform configuration inside the limits.
pub fn config(rng: &mut impl Rng, model: &KinematicModel) -> JointConfig {
    let values = model
        .limits()
        .iter()
        .map(|l| rng.gen_range(l.lower..=l.upper))
        .collect();
    JointConfig::new(model, values).unwrap()
}

/// Central-difference Jacobian: linear rows from positions, angular rows
/// from the rotation vector of `R(q + h) R(q - h)ᵀ`.
pub fn numeric_jacobian(model: &KinematicModel, q: &JointConfig, h: f64) -> DMatrix<f64> {
    let n = q.len();
    let mut j = DMatrix::zeros(6, n);
    for c in 0..n {
        let mut plus = q.values().to_vec();
        let mut minus = q.values().to_vec();
        plus[c] += h;
        minus[c] -= h;
        let fk = |v: Vec<f64>| end_effector_pose(model, &JointConfig::new(model, v).unwrap()).unwrap();
        let (a, b) = (fk(plus), fk(minus));
        let lin = (a.translation - b.translation) / (2.0 * h);
        let ang = (a.rotation * b.rotation.transpose()).to_axis_angle().0 / (2.0 * h);
        for r in 0..3 {
            j[(r, c)] = lin[r];
            j[(r + 3, c)] = ang[r];
        }
    }
    j
}

/// Camera-space triangle used by the rasterizer oracle.
pub type Triangle = [Vector3<f64>; 3];

/// Nearest hit depth of the ray through the center of pixel `(x, y)`.
///
/// The ray is `t · ((u - cx) / fx, (v - cy) / fy, 1)`, so the Möller–Trumbore
/// parameter `t` is the camera-space depth.
pub fn oracle_depth(k: &CameraIntrinsics, tris: &[Triangle], x: u32, y: u32) -> Option<f64> {
    let d = Vector3::new((x as f64 + 0.5 - k.cx) / k.fx, (y as f64 + 0.5 - k.cy) / k.fy, 1.0);
    let mut best: Option<f64> = None;
    for [a, b, c] in tris {
        let e1 = b - a;
        let e2 = c - a;
        let p = d.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-15 {
            continue;
        }
        let s = -a;
        let u = s.dot(&p) / det;
        let qv = s.cross(&e1);
        let v = d.dot(&qv) / det;
        if u < 0.0 || v < 0.0 || u + v > 1.0 {
            continue;
        }
        let t = e2.dot(&qv) / det;
        if t > 0.0 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    }
    best
}

fn segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

/// Whether a pixel center lies within `band` pixels of any projected edge.
pub fn near_edge(k: &CameraIntrinsics, tris: &[Triangle], x: u32, y: u32, band: f64) -> bool {
    let c = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
    let project = |v: &Vector3<f64>| Vector2::new(k.fx * v.x / v.z + k.cx, k.fy * v.y / v.z + k.cy);
    tris.iter().any(|t| {
        let p = t.map(|v| project(&v));
        (0..3).any(|i| segment_distance(&c, &p[i], &p[(i + 1) % 3]) < band)
    })
}

/// Up to 50 triangles in front of a 64×64 camera, some overlapping in depth.
pub fn random_scene(rng: &mut impl Rng) -> (CameraIntrinsics, Vec<Triangle>) {
    let k = CameraIntrinsics::new(60.0, 60.0, 32.0, 32.0, 64, 64).unwrap();
    let count = rng.gen_range(1..=50);
    let tris = (0..count)
        .map(|_| {
            let z = rng.gen_range(1.0..4.0);
            let center = Vector3::new(rng.gen_range(-0.6..0.6) * z, rng.gen_range(-0.6..0.6) * z, z);
            let size = rng.gen_range(0.05..0.6) * z;
            [0, 1, 2].map(|_| {
                center
                    + Vector3::new(
                        rng.gen_range(-size..size),
                        rng.gen_range(-size..size),
                        rng.gen_range(-0.5..0.5),
                    )
            })
        })
        .collect();
    (k, tris)
}
