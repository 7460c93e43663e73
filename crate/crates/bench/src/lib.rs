//! Inputs shared by the benchmarks.

use std::sync::Arc;

use nalgebra::Vector3;

use embodiswap::geometry::{CameraIntrinsics, Rotation3, Se3};
use embodiswap::render::{make_primitive, Primitive, RenderScene};

/// A 640×480 scene of `count` spheres and boxes spread over 1.5 to 3 m.
pub fn scene(count: usize) -> RenderScene {
    let k = CameraIntrinsics::new(525.0, 525.0, 320.0, 240.0, 640, 480).expect("intrinsics");
    let sphere = Arc::new(make_primitive(Primitive::Sphere { radius: 0.08 }).expect("sphere"));
    let cube = Arc::new(
        make_primitive(Primitive::Box {
            size: Vector3::new(0.15, 0.1, 0.2),
        })
        .expect("box"),
    );
    let mut scene = RenderScene::new(k);
    for i in 0..count {
        let t = i as f64 / count.max(1) as f64;
        let angle = t * std::f64::consts::TAU;
        let pose = Se3::new(
            Rotation3::from_rpy(angle, 0.5 * angle, 0.3),
            Vector3::new(0.6 * angle.cos(), 0.4 * angle.sin(), 1.5 + 1.5 * t),
        );
        let mesh = if i % 2 == 0 { sphere.clone() } else { cube.clone() };
        scene.push(mesh, pose);
    }
    scene
}
