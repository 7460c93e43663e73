use std::fs;
use std::path::{Path, PathBuf};

use embodiswap::geometry::Se3;
use embodiswap::kinematics::{end_effector_pose, JointConfig};
use embodiswap::labels::RelPoseLabel;
use embodiswap::pipeline::io::{self, parse_jsonl};
use embodiswap::pipeline::{
    run, validate_bundle, ClipBundle, ClipStatus, ExclusionReason, FindingKind, PipelineConfig, RunMode,
    COMPOSITES_DIR, LABELS_FILE, MANIFEST_FILE,
};
use embodiswap::synth::{self, SynthClip};

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn fixture(extra: &str) -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let urdf = synth::write_robot(&root).unwrap();
    let config = synth::write_config(&root, &urdf, &root.join("out"), extra).unwrap();
    Fixture {
        _tmp: tmp,
        root,
        config,
    }
}

fn clip(root: &Path, name: &str, params: &SynthClip) -> ClipBundle {
    synth::write_clip(&root.join(name), params).unwrap()
}

fn labels(out: &Path, clip: &str) -> Vec<RelPoseLabel> {
    let text = fs::read_to_string(out.join(clip).join(LABELS_FILE)).unwrap();
    parse_jsonl::<RelPoseLabel>(&text)
        .into_iter()
        .map(|(_, r)| r.unwrap())
        .collect()
}

#[test]
fn complete_fixture_validates() {
    let f = fixture("");
    let b = clip(&f.root, "a", &SynthClip::default());
    let r = validate_bundle(&b);
    assert!(r.ok(), "{:?}", r.findings);
    assert_eq!(r.frames, vec![0, 1, 2]);
}

#[test]
fn missing_depth_is_reported_for_its_frame() {
    let f = fixture("");
    let b = clip(&f.root, "a", &SynthClip::default());
    fs::remove_file(b.depth_path(2)).unwrap();
    let r = validate_bundle(&b);
    assert_eq!(r.findings.len(), 1);
    assert_eq!(
        (r.findings[0].frame, r.findings[0].kind),
        (Some(2), FindingKind::MissingDepth)
    );
}

#[test]
fn corrupt_depth_is_reported() {
    let f = fixture("");
    let b = clip(&f.root, "a", &SynthClip::default());
    let bytes = fs::read(b.depth_path(1)).unwrap();
    fs::write(b.depth_path(1), &bytes[..bytes.len() / 2]).unwrap();
    fs::write(b.depth_path(0), b"P5\n1 1\n255\n\0").unwrap();
    let r = validate_bundle(&b);
    let got: Vec<_> = r.findings.iter().map(|f| (f.frame, f.kind)).collect();
    assert_eq!(
        got,
        vec![
            (Some(0), FindingKind::CorruptDepth),
            (Some(1), FindingKind::CorruptDepth)
        ]
    );
}

#[test]
fn missing_hand_and_frame_outside_span_is_ignored() {
    let f = fixture("");
    let b = clip(&f.root, "a", &SynthClip::default());
    // an extra image after the span needs nothing else
    fs::copy(b.frame_path(0), b.frame_path(9)).unwrap();
    assert!(validate_bundle(&b).ok());

    let hands = fs::read_to_string(b.dir.join("hands.jsonl")).unwrap();
    let kept: Vec<&str> = hands.lines().filter(|l| !l.starts_with("{\"frame\":1,")).collect();
    fs::write(b.dir.join("hands.jsonl"), kept.join("\n")).unwrap();
    let r = validate_bundle(&b);
    assert_eq!(r.findings.len(), 1);
    assert_eq!(
        (r.findings[0].frame, r.findings[0].kind),
        (Some(1), FindingKind::MissingHand)
    );
}

#[test]
fn dimension_mismatch_is_reported() {
    let f = fixture("");
    let b = clip(&f.root, "a", &SynthClip::default());
    let small = image::RgbImage::new(10, 10);
    fs::write(b.frame_path(0), io::encode_png(&small)).unwrap();
    let r = validate_bundle(&b);
    assert_eq!(r.findings[0].kind, FindingKind::DimensionMismatch);
}

#[test]
fn golden_run_writes_composites_labels_and_manifest() {
    let f = fixture("");
    let b = clip(&f.root, "a", &SynthClip::default());
    let cfg = PipelineConfig::load(&f.config).unwrap();
    let manifest = run(&cfg, &[b], RunMode::Composite).unwrap();

    let entry = &manifest.clips[0];
    assert_eq!(entry.status, ClipStatus::Ok, "{:?}", entry.error);
    assert_eq!((entry.composites_written, entry.labels_emitted), (3, 2));
    assert_eq!(entry.excluded.len(), 1);
    assert_eq!(entry.excluded[0].reason, ExclusionReason::LookaheadUnavailable);
    assert!(manifest.reconciles());
    assert!(cfg.output_dir.join(MANIFEST_FILE).is_file());

    // labels equal the relative FK motion of the generating joint values
    let model = synth::planar_model();
    let fk = |q: [f64; 2]| end_effector_pose(&model, &JointConfig::new(&model, q.to_vec()).unwrap()).unwrap();
    let qs = SynthClip::default().joint_values;
    for (i, label) in labels(&cfg.output_dir, "a").iter().enumerate() {
        let expected: Se3 = fk(qs[i]).inverse().compose(&fk(qs[i + 1]));
        let (dt, dr) = label.to_se3().distance(&expected);
        assert!(dt < 1e-6 && dr < 1e-6, "label {i}: {dt} {dr}");
        assert_eq!((label.frame_index, label.lookahead_k), (i as u64, 1));
    }

    let composite = io::load_png_rgb(&cfg.output_dir.join("a").join(COMPOSITES_DIR).join("000000.png")).unwrap();
    let scene = io::load_png_rgb(&f.root.join("a/frames/000000.png")).unwrap();
    assert_eq!(composite.dimensions(), scene.dimensions());
    let changed = composite.pixels().zip(scene.pixels()).filter(|(a, b)| a != b).count();
    assert!(changed > 50, "robot visible in {changed} pixels");
    // the occluder is nearer than the arm everywhere
    let [x0, x1, y0, y1] = synth::OCCLUDER;
    for y in y0..y1 {
        for x in x0..x1 {
            assert_eq!(composite.get_pixel(x, y), scene.get_pixel(x, y));
        }
    }
}

#[test]
fn degenerate_frame_is_excluded() {
    let f = fixture("");
    let params = SynthClip {
        degenerate_frame: Some(1),
        ..SynthClip::default()
    };
    let b = clip(&f.root, "a", &params);
    let cfg = PipelineConfig::load(&f.config).unwrap();
    let manifest = run(&cfg, &[b], RunMode::Composite).unwrap();
    let entry = &manifest.clips[0];
    assert_eq!(entry.excluded_for(ExclusionReason::DegenerateHand), 1);
    assert_eq!(
        entry
            .excluded
            .iter()
            .find(|e| e.reason == ExclusionReason::DegenerateHand)
            .unwrap()
            .frame,
        1
    );
    assert_eq!(entry.composites_written, 2);
    assert!(manifest.reconciles());
}

#[test]
fn unreachable_frame_is_excluded() {
    let f = fixture("");
    let b = clip(&f.root, "a", &SynthClip::default());
    // push frame 2 out of reach by moving its hand 3 m sideways
    let path = b.dir.join("hands.jsonl");
    let mut recs: Vec<io::HandRecord> = parse_jsonl(&fs::read_to_string(&path).unwrap())
        .into_iter()
        .map(|(_, r)| r.unwrap())
        .collect();
    for p in &mut recs[2].keypoints {
        p[0] += 3.0;
    }
    fs::write(&path, io::to_jsonl(&recs)).unwrap();

    let cfg = PipelineConfig::load(&f.config).unwrap();
    let manifest = run(&cfg, &[b], RunMode::Labels).unwrap();
    let entry = &manifest.clips[0];
    assert_eq!(entry.excluded_for(ExclusionReason::IkUnreachable), 1);
    assert_eq!((entry.composites_written, entry.labels_emitted), (0, 1));
    assert!(manifest.reconciles());
}

#[test]
fn failing_clip_does_not_stop_others() {
    let f = fixture("parallelism = 2");
    let good = clip(&f.root, "good", &SynthClip::default());
    let bad = clip(&f.root, "bad", &SynthClip::default());
    fs::remove_file(bad.depth_path(0)).unwrap();
    let cfg = PipelineConfig::load(&f.config).unwrap();
    let manifest = run(&cfg, &[bad, good], RunMode::Composite).unwrap();

    assert_eq!(manifest.clips[0].clip, "bad");
    assert_eq!(manifest.clips[0].status, ClipStatus::Failed);
    assert_eq!(manifest.clips[0].excluded_for(ExclusionReason::MissingInput), 3);
    assert_eq!(manifest.clips[0].findings[0].kind, FindingKind::MissingDepth);
    assert_eq!(manifest.clips[1].status, ClipStatus::Ok);
    assert_eq!(manifest.clips[1].composites_written, 3);
    assert!(manifest.reconciles());
    assert!(!cfg.output_dir.join("bad").join(COMPOSITES_DIR).exists());
}

#[test]
fn two_clips_are_reported_in_input_order() {
    let f = fixture("parallelism = 4");
    let a = clip(&f.root, "a", &SynthClip::default());
    let params = SynthClip {
        joint_values: vec![[-0.5, 1.0], [-0.4, 0.9], [-0.3, 0.8], [-0.2, 0.7]],
        ..SynthClip::default()
    };
    let b = clip(&f.root, "b", &params);
    let cfg = PipelineConfig::load(&f.config).unwrap();
    let manifest = run(&cfg, &[b, a], RunMode::Labels).unwrap();
    let names: Vec<_> = manifest.clips.iter().map(|c| c.clip.as_str()).collect();
    assert_eq!(names, ["b", "a"]);
    assert_eq!(manifest.clips[0].labels_emitted, 3);
    assert!(manifest.reconciles());
}

#[test]
fn duplicate_clip_names_are_rejected() {
    let f = fixture("");
    let a = clip(&f.root, "a", &SynthClip::default());
    let cfg = PipelineConfig::load(&f.config).unwrap();
    assert!(run(&cfg, &[a.clone(), a], RunMode::Labels).is_err());
}

#[test]
fn missing_urdf_fails_the_run() {
    let f = fixture("");
    fs::remove_file(f.root.join(synth::URDF_FILE)).unwrap();
    let a = clip(&f.root, "a", &SynthClip::default());
    let cfg = PipelineConfig::load(&f.config).unwrap();
    assert!(matches!(
        run(&cfg, &[a], RunMode::Labels),
        Err(embodiswap::PipelineError::UrdfLoadFailure(_))
    ));
}

#[test]
fn reruns_are_byte_identical() {
    let f = fixture("parallelism = 3");
    let a = clip(&f.root, "a", &SynthClip::default());
    let cfg = PipelineConfig::load(&f.config).unwrap();
    let read_all = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        for sub in ["a", "a/composites"] {
            for e in fs::read_dir(dir.join(sub)).unwrap() {
                let p = e.unwrap().path();
                if p.is_file() {
                    files.push((p.display().to_string(), fs::read(&p).unwrap()));
                }
            }
        }
        files.push(("manifest".into(), fs::read(dir.join(MANIFEST_FILE)).unwrap()));
        files.sort();
        files
    };
    run(&cfg, std::slice::from_ref(&a), RunMode::Composite).unwrap();
    let first = read_all(&cfg.output_dir);
    fs::remove_dir_all(&cfg.output_dir).unwrap();
    run(&cfg, &[a], RunMode::Composite).unwrap();
    assert_eq!(first, read_all(&cfg.output_dir));
}
