//! Command-line front end: batch edits, depth export, layout benchmark,
//! synthetic fixtures and the interactive session server.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tintsplat::optimizer::{IterationMetrics, Tint};
use tintsplat::render::{bench_layouts, RenderConfig};
use tintsplat::scene::{generate_synthetic_scene, load_cameras, load_scene_ply, save_cameras, save_scene_ply, Recipe};
use tintsplat::service::{run_edit, training_targets, EditSettings, RunMode, Targets};
use tintsplat::stereo::{estimate_depth, DepthMethod};
use tintsplat::{Image, Scene, TrainingView};

mod server;

#[derive(Parser)]
#[command(name = "tintsplat", version, about = "Recolor pre-trained Gaussian Splatting scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve an interactive editing session over a websocket.
    View(ViewArgs),
    /// Apply one painted selection and tint, then refit the colors.
    Edit(EditArgs),
    /// Export the depth map of one training view as PFM.
    Depth(DepthArgs),
    /// Time rendering into HWC versus CHW buffers.
    Bench(BenchArgs),
    /// Write a synthetic fixture scene and its training views.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    scene: PathBuf,
    /// Camera manifest; training images are resolved relative to it.
    #[arg(long)]
    cameras: PathBuf,
    /// Refit against the loaded photos or against renders of the input scene.
    #[arg(long, default_value = "photos")]
    targets: Targets,
}

impl Inputs {
    fn load(&self) -> anyhow::Result<(Scene, Vec<TrainingView>)> {
        let scene = load_scene_ply(&self.scene)?;
        let views = load_cameras(&self.cameras)?;
        if views.is_empty() {
            anyhow::bail!("{} lists no views", self.cameras.display());
        }
        let views = training_targets(&scene, views, self.targets, &RenderConfig::default());
        Ok((scene, views))
    }
}

#[derive(Args)]
struct ViewArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value = "stereo-hv")]
    depth_method: DepthMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Publish a scene snapshot every N optimizer iterations.
    #[arg(long, default_value_t = 10)]
    snapshot_every: u64,
    /// Only run iterations on `step` messages, never in the background.
    #[arg(long)]
    deterministic: bool,
    /// Target frame rate of the stream.
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
}

#[derive(Args)]
struct EditArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// PNG mask; pixels whose brightest channel is at least half are selected.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    view_id: u32,
    #[arg(long)]
    tint: Tint,
    #[arg(long, default_value_t = 1000)]
    iters: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "stereo-hv")]
    depth_method: DepthMethod,
    #[arg(long)]
    out: PathBuf,
    /// Also write every iteration's metrics as CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct DepthArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    view_id: u32,
    #[arg(long, default_value = "stereo-hv")]
    depth_method: DepthMethod,
    /// Stereo baseline in world units; derived from the scene extent if absent.
    #[arg(long)]
    baseline: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 0)]
    view_id: u32,
    #[arg(long, default_value_t = 30)]
    repetitions: usize,
    /// Write the timing table as CSV here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// plane, two-blobs or orbit-room
    #[arg(long)]
    recipe: Recipe,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    views: Option<usize>,
    /// Output directory: scene.ply, cameras.txt and view PNGs.
    #[arg(long)]
    out: PathBuf,
}

fn find_view(views: &[TrainingView], id: u32) -> anyhow::Result<&TrainingView> {
    views.iter().find(|v| v.id == id).with_context(|| format!("unknown view id {id}"))
}

fn settings(method: DepthMethod, seed: u64) -> EditSettings {
    let mut s = EditSettings { seed, ..Default::default() };
    s.depth.method = method;
    s
}

fn write_metrics(path: &Path, metrics: &[IterationMetrics]) -> anyhow::Result<()> {
    let mut text = String::from(IterationMetrics::CSV_HEADER);
    text.push('\n');
    for m in metrics {
        text.push_str(&m.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn edit(args: EditArgs) -> anyhow::Result<()> {
    let (scene, views) = args.inputs.load()?;
    let view = find_view(&views, args.view_id)?;
    let mask = Image::load_png(&args.mask)?;
    if mask.width() != view.intrinsics.width || mask.height() != view.intrinsics.height {
        anyhow::bail!(
            "mask {} is {}x{}, view {} is {}x{}",
            args.mask.display(),
            mask.width(),
            mask.height(),
            view.id,
            view.intrinsics.width,
            view.intrinsics.height
        );
    }
    let outcome = run_edit(scene, &views, args.view_id, &mask, args.tint, args.iters, &settings(args.depth_method, args.seed))?;
    log::info!("selection: {} points, {} outliers removed", outcome.cloud_size, outcome.removed_outliers);
    save_scene_ply(&outcome.scene, &args.out)?;
    if let Some(path) = &args.metrics {
        write_metrics(path, &outcome.metrics)?;
    }
    println!("{}", IterationMetrics::CSV_HEADER);
    if let Some(last) = outcome.metrics.last() {
        println!("{last}");
    }
    Ok(())
}

fn depth(args: DepthArgs) -> anyhow::Result<()> {
    let (scene, views) = args.inputs.load()?;
    let camera = find_view(&views, args.view_id)?.camera();
    let mut cfg = settings(args.depth_method, 0).depth;
    cfg.baseline = args.baseline;
    let depth = estimate_depth(&scene, &camera, &cfg)?;
    depth.save_pfm(&args.out)?;
    println!("{} of {} pixels have finite depth", depth.finite_count(), depth.data().len());
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let (scene, views) = args.inputs.load()?;
    let camera = find_view(&views, args.view_id)?.camera();
    let report = bench_layouts(&scene, &camera, args.repetitions)?;
    let csv = report.to_csv();
    print!("{csv}");
    if let Some(path) = &args.out {
        std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    }
    let [hwc, chw] = [&report.rows[0], &report.rows[1]];
    println!(
        "{} gaussians at {}x{}, {} repetitions: hwc {:.3} ms, chw {:.3} ms (median), images identical: {}",
        scene.len(),
        camera.width(),
        camera.height(),
        args.repetitions,
        hwc.median_ms,
        chw.median_ms,
        report.identical
    );
    if !report.identical {
        anyhow::bail!("layouts rendered different images");
    }
    Ok(())
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let mut recipe = args.recipe;
    if args.width.is_some() || args.height.is_some() {
        let (w, h) = (args.width.unwrap_or(recipe.width), args.height.unwrap_or(recipe.height));
        recipe = recipe.with_resolution(w, h);
    }
    if let Some(n) = args.views {
        recipe = recipe.with_views(n);
    }
    let (scene, views) = generate_synthetic_scene(args.seed, &recipe)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    save_scene_ply(&scene, &args.out.join("scene.ply"))?;
    save_cameras(&views, &args.out.join("cameras.txt"))?;
    println!("{} gaussians, {} views -> {}", scene.len(), views.len(), args.out.display());
    Ok(())
}

fn view(args: ViewArgs) -> anyhow::Result<()> {
    let (scene, views) = args.inputs.load()?;
    let mut s = settings(args.depth_method, args.seed);
    s.optimizer.snapshot_every = args.snapshot_every;
    let mode = if args.deterministic { RunMode::Inline } else { RunMode::Background };
    let options = server::ServerOptions { host: args.host, port: args.port, fps: args.fps };
    server::serve(scene, views, s, mode, &options)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors are input errors; exit code 2 is reserved for empty selections.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::View(a) => view(a),
        Command::Edit(a) => edit(a),
        Command::Depth(a) => depth(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<tintsplat::Error>() {
                Some(tintsplat::Error::EmptySelection(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
