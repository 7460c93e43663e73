use criterion::{black_box, criterion_group, criterion_main, Criterion};

use embodiswap::composite::{blend, SceneFrame};
use embodiswap::kinematics::{end_effector_pose, solve_ik, IkParams, JointConfig};
use embodiswap::render::{rasterize, DepthMap};
use embodiswap::retarget::{retarget_pose, HandKeypoints, HandSide};
use embodiswap::synth;

fn retarget(c: &mut Criterion) {
    let kp = HandKeypoints::new(synth::canonical_keypoints(), HandSide::Right).unwrap();
    c.bench_function("retarget_pose", |b| b.iter(|| retarget_pose(black_box(&kp)).unwrap()));
}

fn ik(c: &mut Criterion) {
    let model = synth::planar_model();
    let target = end_effector_pose(&model, &JointConfig::new(&model, vec![0.7, -1.1]).unwrap()).unwrap();
    let seed = JointConfig::new(&model, vec![0.2, -0.3]).unwrap();
    let params = IkParams::default();
    c.bench_function("solve_ik planar", |b| {
        b.iter(|| solve_ik(&model, black_box(&target), &seed, &params).unwrap())
    });
}

fn render(c: &mut Criterion) {
    let scene = embodiswap_bench::scene(24);
    c.bench_function("rasterize 640x480 24 meshes", |b| {
        b.iter(|| rasterize(black_box(&scene)))
    });
}

fn composite(c: &mut Criterion) {
    let scene = embodiswap_bench::scene(24);
    let render = rasterize(&scene);
    let frame = SceneFrame::new(image::RgbImage::new(640, 480), DepthMap::filled(640, 480, 2.2)).unwrap();
    c.bench_function("blend 640x480", |b| {
        b.iter(|| blend(black_box(&frame), &render).unwrap())
    });
}

criterion_group!(benches, retarget, ik, render, composite);
criterion_main!(benches);
