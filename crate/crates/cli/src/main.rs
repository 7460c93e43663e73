use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use embodiswap::geometry::{CameraIntrinsics, Se3};
use embodiswap::kinematics::{load_urdf, JointConfig, MeshResolver};
use embodiswap::pipeline::io::{encode_png, write_atomic, write_pfm};
use embodiswap::pipeline::{
    run, validate_bundle, ClipBundle, ClipStatus, DatasetManifest, PipelineConfig, PipelineError, Robot, RunMode,
    ValidationReport,
};
use embodiswap::render::{Light, DEFAULT_COLOR, DEFAULT_NEAR_PLANE};

/// Exit status for configuration and usage errors.
const EXIT_CONFIG: u8 = 2;
/// Exit status when validation found problems or a clip failed.
const EXIT_INVALID: u8 = 1;

#[derive(Parser)]
#[command(
    name = "embodiswap",
    version,
    about = "Composite a robot arm into egocentric hand clips and emit motion labels"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check clip bundles without processing them.
    Validate {
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
        /// Print reports as JSON, one per line.
        #[arg(long)]
        json: bool,
    },
    /// Render, blend and label every clip.
    Composite(RunArgs),
    /// Recompute labels only; no images are written.
    Labels(RunArgs),
    /// Render one robot configuration to a PNG.
    RenderPose(RenderPoseArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Clip directories, or text files listing one clip directory per line.
    #[arg(long, required = true, num_args = 1..)]
    clips: Vec<PathBuf>,
}

#[derive(Args)]
struct RenderPoseArgs {
    #[arg(long)]
    urdf: PathBuf,
    /// Robot root in the camera frame: 16 numbers, row-major 4x4.
    #[arg(long, num_args = 16, allow_negative_numbers = true, value_name = "M")]
    pose: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Joint values in movable-joint order; default is mid-range.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    joints: Option<Vec<f64>>,
    /// fx fy cx cy width height.
    #[arg(long, num_args = 6, value_names = ["FX", "FY", "CX", "CY", "W", "H"])]
    intrinsics: Option<Vec<f64>>,
    /// package://<name> root, as name=dir; repeatable.
    #[arg(long = "mesh-root", value_name = "NAME=DIR")]
    mesh_roots: Vec<String>,
    /// Also write the depth map as PFM.
    #[arg(long)]
    depth: Option<PathBuf>,
}

/// Expands list files into clip directories. A path that is a directory is a
/// clip; a file lists clips one per line, relative to the file, `#` comments.
fn expand_clips(args: &[PathBuf]) -> anyhow::Result<Vec<ClipBundle>> {
    let mut out = Vec::new();
    for arg in args {
        if arg.is_file() {
            let text = std::fs::read_to_string(arg).with_context(|| format!("reading {}", arg.display()))?;
            let base = arg.parent().unwrap_or(Path::new("."));
            for line in text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
            {
                out.push(ClipBundle::new(base.join(line)));
            }
        } else {
            out.push(ClipBundle::new(arg));
        }
    }
    Ok(out)
}

fn print_report(r: &ValidationReport) {
    match &r.span {
        Some(s) if r.ok() => println!(
            "{}: ok, {} frames, span [{}, {}) `{}`",
            r.bundle.display(),
            r.frames.len(),
            s.start_frame,
            s.end_frame,
            s.action
        ),
        _ => println!("{}: {} finding(s)", r.bundle.display(), r.findings.len()),
    }
    for f in &r.findings {
        let kind = serde_json::to_value(f.kind)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        match f.frame {
            Some(frame) => println!("  frame {frame:06} {kind}: {}", f.detail),
            None => println!("  {kind}: {}", f.detail),
        }
    }
}

fn validate(bundles: &[PathBuf], json: bool) -> anyhow::Result<u8> {
    let mut invalid = false;
    for b in bundles {
        let report = validate_bundle(&ClipBundle::new(b));
        invalid |= !report.ok();
        if json {
            println!("{}", serde_json::to_string(&report)?);
        } else {
            print_report(&report);
        }
    }
    Ok(if invalid { EXIT_INVALID } else { 0 })
}

fn summarize(manifest: &DatasetManifest) {
    for c in &manifest.clips {
        match c.status {
            ClipStatus::Ok => println!(
                "{}: {} composites, {} labels, {} excluded",
                c.clip,
                c.composites_written,
                c.labels_emitted,
                c.excluded.len()
            ),
            ClipStatus::Failed => println!("{}: FAILED {}", c.clip, c.error.as_deref().unwrap_or("")),
        }
        for w in &c.warnings {
            println!("  warning: {w}");
        }
    }
}

fn run_clips(args: &RunArgs, mode: RunMode) -> Result<u8, (u8, anyhow::Error)> {
    let config = PipelineConfig::load(&args.config).map_err(|e| (EXIT_CONFIG, e.into()))?;
    let clips = expand_clips(&args.clips).map_err(|e| (EXIT_CONFIG, e))?;
    match run(&config, &clips, mode) {
        Ok(manifest) => {
            summarize(&manifest);
            println!(
                "manifest: {}",
                config.output_dir.join(embodiswap::pipeline::MANIFEST_FILE).display()
            );
            Ok(if manifest.failed().next().is_some() {
                EXIT_INVALID
            } else {
                0
            })
        }
        Err(e @ (PipelineError::ConfigInvalid(_) | PipelineError::UrdfLoadFailure(_))) => Err((EXIT_CONFIG, e.into())),
        Err(e) => Err((EXIT_INVALID, e.into())),
    }
}

fn intrinsics(values: Option<&[f64]>) -> anyhow::Result<CameraIntrinsics> {
    let v = values.unwrap_or(&[525.0, 525.0, 320.0, 240.0, 640.0, 480.0]);
    let dim = |x: f64| -> anyhow::Result<u32> {
        if x.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&x) {
            bail!("image size must be a positive integer, got {x}");
        }
        Ok(x as u32)
    };
    Ok(CameraIntrinsics::new(v[0], v[1], v[2], v[3], dim(v[4])?, dim(v[5])?)?)
}

fn render_pose(args: &RenderPoseArgs) -> anyhow::Result<()> {
    let pose: [f64; 16] = args.pose.as_slice().try_into().context("--pose takes 16 numbers")?;
    let camera_from_root = Se3::from_row_major(&pose).context("--pose is not a rigid transform")?;
    let k = intrinsics(args.intrinsics.as_deref())?;

    let mut roots = HashMap::new();
    for entry in &args.mesh_roots {
        let (name, dir) = entry
            .split_once('=')
            .with_context(|| format!("--mesh-root `{entry}` is not NAME=DIR"))?;
        roots.insert(name.to_string(), PathBuf::from(dir));
    }
    let model = load_urdf(&args.urdf)?;
    let q = match &args.joints {
        Some(v) => JointConfig::new(&model, v.clone())?,
        None => JointConfig::midpoint(&model),
    };
    if !q.within_limits(&model) {
        bail!("--joints outside the joint limits");
    }
    let resolver = MeshResolver::new(roots).with_env_fallback();
    let robot = Robot::from_model(model, &resolver, DEFAULT_COLOR, Se3::identity())?;
    let render = robot.render(&q, &camera_from_root, k, Light::default(), DEFAULT_NEAR_PLANE)?;
    write_atomic(&args.out, &encode_png(&render.rgb))?;
    if let Some(path) = &args.depth {
        write_atomic(path, &write_pfm(&render.depth))?;
    }
    println!("{}: {} robot pixels", args.out.display(), render.coverage.count());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Validate { bundles, json } => validate(bundles, *json).map_err(|e| (EXIT_CONFIG, e)),
        Command::Composite(args) => run_clips(args, RunMode::Composite),
        Command::Labels(args) => run_clips(args, RunMode::Labels),
        Command::RenderPose(args) => render_pose(args).map(|_| 0).map_err(|e| (EXIT_CONFIG, e)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
