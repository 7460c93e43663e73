use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use embodiswap::synth::{self, SynthClip};

fn embodiswap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embodiswap"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn workspace() -> Workspace {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let urdf = synth::write_robot(&root).unwrap();
    let config = synth::write_config(&root, &urdf, &root.join("out"), "").unwrap();
    synth::write_clip(&root.join("clip_a"), &SynthClip::default()).unwrap();
    Workspace {
        _tmp: tmp,
        root,
        config,
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_ok_and_failing() {
    let w = workspace();
    let clip = w.root.join("clip_a");
    let out = embodiswap(&["validate", s(&clip)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("ok, 3 frames"));

    fs::remove_file(clip.join("depth/000002.pfm")).unwrap();
    let out = embodiswap(&["validate", s(&clip)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("frame 000002 missing-depth"), "{}", stdout(&out));

    let out = embodiswap(&["validate", "--json", s(&clip)]);
    let report: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(report["findings"][0]["kind"], "missing-depth");
}

#[test]
fn composite_writes_outputs() {
    let w = workspace();
    let out = embodiswap(&[
        "composite",
        "--config",
        s(&w.config),
        "--clips",
        s(&w.root.join("clip_a")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("clip_a: 3 composites, 2 labels, 1 excluded"));
    let out_dir = w.root.join("out");
    assert!(out_dir.join("clip_a/composites/000002.png").is_file());
    assert_eq!(
        fs::read_to_string(out_dir.join("clip_a/labels.jsonl"))
            .unwrap()
            .lines()
            .count(),
        2
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mode"], "composite");
    assert_eq!(manifest["clips"][0]["labels_emitted"], 2);
}

#[test]
fn labels_mode_writes_no_images() {
    let w = workspace();
    let list = w.root.join("clips.txt");
    fs::write(&list, "# one clip\nclip_a\n").unwrap();
    let out = embodiswap(&["labels", "--config", s(&w.config), "--clips", s(&list)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(w.root.join("out/clip_a/labels.jsonl").is_file());
    assert!(!w.root.join("out/clip_a/composites").exists());
}

#[test]
fn failed_clip_exits_one() {
    let w = workspace();
    let out = embodiswap(&[
        "composite",
        "--config",
        s(&w.config),
        "--clips",
        s(&w.root.join("absent")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("absent: FAILED"));
    assert!(w.root.join("out/manifest.json").is_file());
}

#[test]
fn configuration_errors_exit_two() {
    let w = workspace();
    let clip = w.root.join("clip_a");
    let missing = embodiswap(&[
        "composite",
        "--config",
        s(&w.root.join("nope.toml")),
        "--clips",
        s(&clip),
    ]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = w.root.join("bad.toml");
    fs::write(
        &bad,
        "urdf = \"planar.urdf\"\nend_effector = \"tool\"\noutput_dir = \"out\"\nparallelism = 0\n",
    )
    .unwrap();
    let out = embodiswap(&["labels", "--config", s(&bad), "--clips", s(&clip)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parallelism"));

    let wrong_link = w.root.join("link.toml");
    fs::write(
        &wrong_link,
        "urdf = \"planar.urdf\"\nend_effector = \"gripper\"\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let out = embodiswap(&["labels", "--config", s(&wrong_link), "--clips", s(&clip)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn render_pose_draws_the_robot() {
    let w = workspace();
    let png = w.root.join("pose.png");
    let depth = w.root.join("pose.pfm");
    // camera 2 m above the arm looking down: root at z = 2, image y = -world y
    let pose = [
        "1", "0", "0", "-0.5", "0", "-1", "0", "0", "0", "0", "-1", "2", "0", "0", "0", "1",
    ];
    let urdf = w.root.join(synth::URDF_FILE);
    let mut args = vec!["render-pose", "--urdf", s(&urdf)];
    args.extend(["--out", s(&png), "--depth", s(&depth), "--joints", "0.3", "-0.4"]);
    args.extend(["--intrinsics", "80", "80", "48", "36", "96", "72", "--pose"]);
    args.extend(pose);
    let out = embodiswap(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(png.is_file() && depth.is_file());
    let pixels: usize = stdout(&out).split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(pixels > 100, "{pixels}");

    let out = embodiswap(&[
        "render-pose",
        "--urdf",
        "missing.urdf",
        "--out",
        s(&png),
        "--pose",
        "1",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
