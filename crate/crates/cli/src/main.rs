use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lidar_label::calib::load_rig;
use lidar_label::detect::class_id;
use lidar_label::fusion::DistortionMode;
use lidar_label::pipeline::{format_comparison, format_stats, run_pipeline, PipelineConfig};
use lidar_label::scene::{default_rig, gen_scene, SceneSpec};
use lidar_label::segment::read_report_csv;

#[derive(Parser)]
#[command(name = "lidar-label", version, about = "Label LIDAR points from 2D detections and denoise them with k-means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label and denoise every frame of a sequence
    Run(RunArgs),
    /// Write a synthetic sequence with ground truth
    GenScene(GenArgs),
    /// Summarize a report CSV, or compare two
    Stats(StatsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with pipeline settings; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rig calibration (JSON)
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Manifest with the lidar stream
    #[arg(long)]
    clouds: Option<PathBuf>,
    /// Manifest with the camera detection streams
    #[arg(long)]
    dets: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Matching tolerance between cloud and detection timestamps (s)
    #[arg(long)]
    tol: Option<f64>,
    /// Minimum detection confidence
    #[arg(long)]
    conf: Option<f64>,
    /// Comma-separated class names or ids to keep (default: all)
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Clusters per detection
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Label only; keep every labeled point
    #[arg(long)]
    no_denoise: bool,
    /// Apply lens distortion before the box test (on|off)
    #[arg(long)]
    distortion: Option<DistortionMode>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Rig calibration to plant objects for (default: built-in five-camera rig)
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    frames: usize,
    /// Objects per frame
    #[arg(long, default_value_t = 4)]
    objects: usize,
    /// Share of noise among the points in each box, in [0, 1)
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 1500)]
    points_per_object: usize,
    /// Ground points per frame
    #[arg(long, default_value_t = 20_000)]
    background: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw boxes on distorted (on) or undistorted (off) images
    #[arg(long, default_value = "off")]
    distortion: DistortionMode,
}

#[derive(Args)]
struct StatsArgs {
    /// Report CSV written by `run`
    #[arg(required_unless_present = "compare")]
    report: Option<PathBuf>,
    /// Two report CSVs; prints per-frame deltas of the second against the first
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "report")]
    compare: Option<Vec<PathBuf>>,
}

fn parse_classes(items: &[String]) -> Result<BTreeSet<u8>> {
    items
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<u8>() {
            Ok(id) if id < 80 => Ok(id),
            Ok(id) => bail!("class id {id} outside 0..80"),
            Err(_) => class_id(s).with_context(|| format!("unknown class {s:?}")),
        })
        .collect()
}

fn pipeline_config(args: RunArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("bad config {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:expr),* $(,)?) => {
            $(if let Some(v) = args.$flag { $field = v; })*
        };
    }
    set! {
        calib => cfg.calib,
        clouds => cfg.clouds,
        dets => cfg.dets,
        out => cfg.out,
        tol => cfg.tolerance,
        conf => cfg.min_confidence,
        k => cfg.kmeans.k,
        max_iter => cfg.kmeans.max_iter,
        seed => cfg.kmeans.seed,
        distortion => cfg.distortion,
        workers => cfg.workers,
    }
    if let Some(c) = &args.classes {
        cfg.classes = parse_classes(c)?;
    }
    if args.no_denoise {
        cfg.denoise = false;
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = pipeline_config(args)?;
    let summary = run_pipeline(&cfg)?;
    let reports = read_report_csv(cfg.report_path())?;
    print!("{}", format_stats(&reports));
    let t = &summary.timing;
    println!(
        "time: {:.3} s total, {:.3} s/frame mean, {:.3} s/frame max",
        t.total_seconds, t.mean_frame_seconds, t.max_frame_seconds
    );
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let rig = match &args.calib {
        Some(p) => load_rig(p)?,
        None => default_rig(),
    };
    let spec = SceneSpec {
        frames: args.frames,
        objects: args.objects,
        noise_fraction: args.noise,
        points_per_object: args.points_per_object,
        background_points: args.background,
        seed: args.seed,
        distortion: args.distortion,
        ..Default::default()
    };
    let paths = gen_scene(&spec, &rig, &args.out)?;
    println!("calib:  {}", paths.calib.display());
    println!("clouds: {}", paths.clouds.display());
    println!("dets:   {}", paths.dets.display());
    println!("truth:  {}", paths.truth_dir.display());
    Ok(())
}

fn read(path: &Path) -> Result<Vec<lidar_label::segment::FrameReport>> {
    Ok(read_report_csv(path)?)
}

fn stats(args: StatsArgs) -> Result<()> {
    match (args.compare.as_deref(), args.report) {
        (Some([a, b]), _) => print!("{}", format_comparison(&read(a)?, &read(b)?)),
        (_, Some(report)) => print!("{}", format_stats(&read(&report)?)),
        _ => bail!("give a report CSV or --compare A B"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::GenScene(a) => gen(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
