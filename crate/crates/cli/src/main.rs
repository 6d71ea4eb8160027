use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use nalgebra::Vector2;
use serde::Serialize;

use ncl_core::io::{
    assign_splits, read_boundaries, read_camera, read_json, read_layout, write_boundaries, write_camera, write_json,
    write_layout, RunManifest, SampleRecord, SPLIT_RATIOS,
};
use ncl_core::metrics::{evaluate, EvalReport};
use ncl_core::pipeline::{recover_layout, PipelineConfig, PipelineError, World};
use ncl_core::sweep::{run_sweep, sweep_csv, sweep_svg, task_seed, CorpusRoom, SweepConfig, MIN_WALL_COLUMNS};
use ncl_core::synth::{add_noise, generate_layout, project_layout, project_layout_detailed, LayoutSpec, NoiseSpec};
use ncl_core::CameraModel;

/// Metric room layouts from non-central circular panoramas.
#[derive(Parser, Debug)]
#[command(name = "ncl", version)]
#[command(after_help = "Angles in files are radians. Angle flags take radians, or degrees with a `deg` suffix \
(e.g. 30deg).\nNCL_THREADS caps the worker threads. Exit codes: 0 ok, 1 pipeline failure, 2 input error.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a corpus of synthetic rooms with their boundary maps.
    Synth(SynthArgs),
    /// Project a layout into a boundary map, optionally with noise.
    Project(ProjectArgs),
    /// Recover a layout from a boundary map.
    Solve(SolveArgs),
    /// Compare a recovered layout with the ground truth.
    Eval(EvalArgs),
    /// Noise-sensitivity sweep over a synthetic corpus.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Serialize)]
struct CameraArgs {
    /// Radius of the optical-center circle, meters.
    #[arg(long, default_value_t = 1.0)]
    rc: f64,
    /// Image rows.
    #[arg(long, default_value_t = 512)]
    rows: usize,
    /// Image columns.
    #[arg(long, default_value_t = 1024)]
    cols: usize,
}

impl CameraArgs {
    fn camera(&self) -> Result<CameraModel, CliError> {
        let d = CameraModel::default();
        CameraModel::new(self.rc, self.rows, self.cols, d.phi_range(), d.varphi_range()).map_err(CliError::input)
    }
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of rooms.
    #[arg(long, default_value_t = 50)]
    rooms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability of clipping each convex corner with an oblique wall.
    #[arg(long, default_value_t = 0.0)]
    atlanta_prob: f64,
    /// Wall-count range of the rectilinear base plan, `lo..hi` (inclusive).
    #[arg(long, default_value = "4..14", value_parser = parse_range)]
    walls: (usize, usize),
    /// Fixed rotation of every room about the vertical axis; random when omitted.
    #[arg(long, value_parser = parse_angle)]
    rotation: Option<f64>,
    /// Keep only rooms whose walls are all visible, in order, over at least 12 columns.
    #[arg(long)]
    unoccluded: bool,
    #[command(flatten)]
    camera: CameraArgs,
}

#[derive(Args, Debug, Serialize)]
struct ProjectArgs {
    #[arg(long)]
    layout: PathBuf,
    /// camera.json; the default camera when omitted.
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Output boundaries.csv.
    #[arg(long)]
    out: PathBuf,
    /// Gaussian row noise, pixels.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Fraction of columns replaced by spikes.
    #[arg(long, default_value_t = 0.0)]
    spike_rate: f64,
    /// Spike amplitude, pixels.
    #[arg(long, default_value_t = 20.0)]
    spike_magnitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    #[arg(long)]
    boundaries: PathBuf,
    #[arg(long)]
    camera: PathBuf,
    /// manhattan or atlanta.
    #[arg(long)]
    world: World,
    /// Output layout.json.
    #[arg(long)]
    out: PathBuf,
    /// Full pipeline configuration as JSON; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RANSAC seed.
    #[arg(long)]
    seed: Option<u64>,
    /// RANSAC inlier threshold, pixels.
    #[arg(long)]
    inlier_threshold: Option<f64>,
    /// Atlanta occlusion gap, meters.
    #[arg(long)]
    gap_threshold: Option<f64>,
    /// Skip the final adjustment.
    #[arg(long)]
    no_adjust: bool,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Camera the prediction was solved with.
    #[arg(long)]
    pred_camera: Option<PathBuf>,
    /// Camera the ground truth was rendered with.
    #[arg(long)]
    gt_camera: Option<PathBuf>,
    /// Output eval.json.
    #[arg(long)]
    out: PathBuf,
    /// CSV table the report row is appended to.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// Corpus directory written by `synth`.
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated noise levels, pixels.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,1,2")]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    spike_rate: f64,
    #[arg(long, default_value_t = 20.0)]
    spike_magnitude: f64,
    /// RANSAC threshold grows to this many sigmas.
    #[arg(long, default_value_t = 3.0)]
    threshold_sigmas: f64,
    /// Output sweep.csv.
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG chart of the medians.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Input(anyhow::Error),
    Pipeline(anyhow::Error),
}

impl CliError {
    fn input(e: impl Into<anyhow::Error>) -> Self {
        CliError::Input(e.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Pipeline(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "input error: {e:#}"),
            CliError::Pipeline(e) => write!(f, "pipeline failure: {e:#}"),
        }
    }
}

impl From<ncl_core::io::IoError> for CliError {
    fn from(e: ncl_core::io::IoError) -> Self {
        CliError::input(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidBoundary(_) | PipelineError::NotFullPanorama | PipelineError::DegenerateConfig(_) => {
                CliError::input(e)
            }
            e => CliError::Pipeline(e.into()),
        }
    }
}

/// Radians, or degrees with a `deg` suffix.
fn parse_angle(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, deg) = match s.strip_suffix("deg") {
        Some(n) => (n.trim(), true),
        None => (s, false),
    };
    let v: f64 = num.parse().map_err(|_| format!("invalid angle '{s}'"))?;
    if !v.is_finite() {
        return Err(format!("invalid angle '{s}'"));
    }
    Ok(if deg { v.to_radians() } else { v })
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected lo..hi, got '{s}'"))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("invalid bound '{x}'"));
    Ok((parse(lo)?, parse(hi)?))
}

struct Timer {
    stages: BTreeMap<String, f64>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            stages: BTreeMap::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        *self.stages.entry(stage.to_string()).or_default() += (now - self.last).as_secs_f64() * 1e3;
        self.last = now;
    }
}

fn config_of<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// `<out>.manifest.json` next to a single output file.
fn write_side_manifest(mut manifest: RunManifest, out: &Path, timer: Timer, files: &[(&str, &Path)]) -> Result<(), CliError> {
    let dir = parent_dir(out);
    let mut sample = SampleRecord {
        id: file_name(out),
        seed: manifest.seeds.first().copied().unwrap_or(0),
        world: None,
        split: None,
        files: BTreeMap::new(),
    };
    for (k, p) in files {
        if parent_dir(p) == dir {
            sample.files.insert(k.to_string(), file_name(p));
        }
    }
    manifest.samples.push(sample);
    manifest.timing_ms = timer.stages;
    manifest.write_as(&dir, &format!("{}.manifest.json", file_name(out)))?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let cam = args.camera.camera()?;
    let rooms_dir = args.out.join("rooms");
    fs::create_dir_all(&rooms_dir).with_context(|| format!("creating {}", rooms_dir.display())).map_err(CliError::input)?;
    write_camera(&args.out.join("camera.json"), &cam)?;
    let base = LayoutSpec {
        walls: args.walls,
        atlanta_clip_probability: args.atlanta_prob,
        rc: cam.rc(),
        rotate: args.rotation.is_none(),
        ..LayoutSpec::default()
    };
    let mut rooms = Vec::with_capacity(args.rooms);
    let mut k = 0u64;
    while rooms.len() < args.rooms {
        if k > 1000 * (args.rooms as u64 + 1) {
            return Err(CliError::input(anyhow::anyhow!("could not generate {} rooms with these settings", args.rooms)));
        }
        let seed = task_seed(args.seed, &[k]);
        k += 1;
        let spec = LayoutSpec { seed, ..base.clone() };
        let mut layout = generate_layout(&spec).map_err(CliError::input)?;
        if let Some(r) = args.rotation {
            layout = layout.transformed(r, Vector2::zeros(), 1.0);
        }
        let Ok(p) = project_layout_detailed(&layout, &cam) else {
            continue;
        };
        if args.unoccluded && !p.visibility.is_unoccluded(MIN_WALL_COLUMNS) {
            continue;
        }
        rooms.push((seed, layout, p.boundary));
    }
    timer.lap("generate");
    let splits = assign_splits(rooms.len(), SPLIT_RATIOS, args.seed);
    let mut manifest = RunManifest::new("synth", config_of(args));
    manifest.seeds = vec![args.seed];
    manifest.split_ratios = Some(SPLIT_RATIOS);
    for (i, ((seed, layout, bm), split)) in rooms.iter().zip(splits).enumerate() {
        let id = format!("room-{i:04}");
        let dir = rooms_dir.join(&id);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())).map_err(CliError::input)?;
        write_layout(&dir.join("layout.json"), layout, None)?;
        write_boundaries(&dir.join("boundaries.csv"), bm)?;
        let world = if layout.is_manhattan(1e-6) { World::Manhattan } else { World::Atlanta };
        let mut files = BTreeMap::new();
        files.insert("layout".to_string(), format!("rooms/{id}/layout.json"));
        files.insert("boundaries".to_string(), format!("rooms/{id}/boundaries.csv"));
        files.insert("camera".to_string(), "camera.json".to_string());
        manifest.samples.push(SampleRecord {
            id,
            seed: *seed,
            world: Some(world),
            split: Some(split),
            files,
        });
    }
    timer.lap("write");
    manifest.timing_ms = timer.stages;
    manifest.write(&args.out)?;
    println!("wrote {} rooms to {}", rooms.len(), args.out.display());
    Ok(())
}

fn cmd_project(args: &ProjectArgs) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let layout = read_layout(&args.layout)?;
    let cam = match &args.camera {
        Some(p) => read_camera(p)?,
        None => CameraModel::default(),
    };
    if args.sigma < 0.0 || !(0.0..1.0).contains(&args.spike_rate) {
        return Err(CliError::input(anyhow::anyhow!("sigma must be >= 0 and spike rate in [0, 1)")));
    }
    timer.lap("read");
    let clean = project_layout(&layout, &cam).map_err(CliError::input)?;
    let noise = NoiseSpec {
        gaussian_sigma: args.sigma,
        spike_rate: args.spike_rate,
        spike_magnitude: args.spike_magnitude,
        seed: args.seed,
    };
    let bm = add_noise(&clean, &noise).clamped(&cam);
    timer.lap("project");
    write_boundaries(&args.out, &bm)?;
    timer.lap("write");
    let mut manifest = RunManifest::new("project", config_of(args));
    manifest.seeds = vec![args.seed];
    write_side_manifest(manifest, &args.out, timer, &[("boundaries", &args.out), ("layout", &args.layout)])
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let bm = read_boundaries(&args.boundaries)?;
    let cam = read_camera(&args.camera)?;
    let mut cfg: PipelineConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.ransac.seed = s;
    }
    if let Some(t) = args.inlier_threshold {
        cfg.ransac.inlier_threshold = t;
    }
    if let Some(g) = args.gap_threshold {
        cfg.gap_threshold = g;
    }
    cfg.skip_adjustment |= args.no_adjust;
    timer.lap("read");
    let rec = recover_layout(&bm, &cam, args.world, &cfg)?;
    timer.lap("recover");
    let diagnostics = serde_json::json!({
        "world": rec.world,
        "segments": rec.segments,
        "inlier_ratios": rec.inlier_ratios,
        "inserted_walls": rec.inserted_walls,
        "adjustment": rec.adjustment,
        "camera": cam,
    });
    write_layout(&args.out, &rec.layout, Some(diagnostics))?;
    timer.lap("write");
    let mut config = config_of(args);
    config["pipeline"] = config_of(&cfg);
    let mut manifest = RunManifest::new("solve", config);
    manifest.seeds = vec![cfg.ransac.seed];
    write_side_manifest(manifest, &args.out, timer, &[("layout", &args.out), ("boundaries", &args.boundaries)])?;
    println!(
        "{} walls ({} inserted), h_c {:.4} m, h_f {:.4} m",
        rec.layout.len(),
        rec.inserted_walls,
        rec.layout.h_c,
        rec.layout.h_f
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let pred = read_layout(&args.pred)?;
    let gt = read_layout(&args.gt)?;
    let cams = match (&args.pred_camera, &args.gt_camera) {
        (Some(a), Some(b)) => Some((read_camera(a)?, read_camera(b)?)),
        _ => None,
    };
    timer.lap("read");
    let mut report: EvalReport = evaluate(&pred, &gt).map_err(|e| CliError::Pipeline(e.into()))?;
    if let Some((a, b)) = cams {
        if a != b {
            report.warnings.push(format!(
                "camera mismatch: prediction rc {} ({}x{}), ground truth rc {} ({}x{})",
                a.rc(),
                a.rows(),
                a.cols(),
                b.rc(),
                b.rows(),
                b.cols()
            ));
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    timer.lap("evaluate");
    write_json(&args.out, &report)?;
    if let Some(table) = &args.table {
        let fresh = !table.exists() || fs::metadata(table).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(table)
            .with_context(|| format!("opening {}", table.display()))
            .map_err(CliError::input)?;
        let mut text = String::new();
        if fresh {
            text.push_str(EvalReport::CSV_HEADER);
            text.push('\n');
        }
        text.push_str(&report.csv_row());
        text.push('\n');
        f.write_all(text.as_bytes())
            .with_context(|| format!("writing {}", table.display()))
            .map_err(CliError::input)?;
    }
    timer.lap("write");
    let manifest = RunManifest::new("eval", config_of(args));
    write_side_manifest(manifest, &args.out, timer, &[("report", &args.out)])?;
    println!("CE {:.6} m, 3D IoU {:.3}%", report.ce_m, report.iou3d_pct);
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<(CameraModel, Vec<CorpusRoom>), CliError> {
    let manifest = RunManifest::read(&dir.join("manifest.json"))?;
    let cam = read_camera(&dir.join("camera.json"))?;
    let mut rooms = Vec::with_capacity(manifest.samples.len());
    for s in &manifest.samples {
        let rel = s
            .files
            .get("layout")
            .ok_or_else(|| CliError::input(anyhow::anyhow!("sample {} has no layout file", s.id)))?;
        let layout = read_layout(&dir.join(rel))?;
        let world = s
            .world
            .unwrap_or(if layout.is_manhattan(1e-6) { World::Manhattan } else { World::Atlanta });
        rooms.push(CorpusRoom {
            id: s.id.clone(),
            seed: s.seed,
            world,
            layout,
        });
    }
    if rooms.is_empty() {
        return Err(CliError::input(anyhow::anyhow!("corpus {} is empty", dir.display())));
    }
    Ok((cam, rooms))
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let (cam, corpus) = load_corpus(&args.corpus)?;
    if args.sigmas.iter().any(|s| !(*s >= 0.0)) || !(0.0..1.0).contains(&args.spike_rate) {
        return Err(CliError::input(anyhow::anyhow!("sigmas must be >= 0 and spike rate in [0, 1)")));
    }
    timer.lap("read");
    let cfg = SweepConfig {
        sigmas: args.sigmas.clone(),
        trials: args.trials,
        seed: args.seed,
        spike_rate: args.spike_rate,
        spike_magnitude: args.spike_magnitude,
        threshold_sigmas: args.threshold_sigmas,
        pipeline: PipelineConfig::default(),
    };
    let result = run_sweep(&corpus, &cam, &cfg).map_err(CliError::input)?;
    timer.lap("sweep");
    fs::write(&args.out, sweep_csv(&result))
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(CliError::input)?;
    if let Some(svg) = &args.svg {
        fs::write(svg, sweep_svg(&result.medians))
            .with_context(|| format!("writing {}", svg.display()))
            .map_err(CliError::input)?;
    }
    timer.lap("write");
    let mut manifest = RunManifest::new("sweep", config_of(args));
    manifest.seeds = vec![args.seed];
    let mut files: Vec<(&str, &Path)> = vec![("sweep", &args.out)];
    if let Some(svg) = &args.svg {
        files.push(("chart", svg));
    }
    write_side_manifest(manifest, &args.out, timer, &files)?;
    for m in &result.medians {
        println!(
            "sigma {:>5}: dir {:.5} deg, depth {:.5} m, CE {:.5} m, {} of {} failed",
            m.sigma, m.dir_err_deg, m.depth_err_m, m.ce_m, m.failures, m.trials
        );
    }
    Ok(())
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NCL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(anyhow::anyhow!("NCL_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(CliError::input)
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Project(a) => cmd_project(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ncl: {e}");
            ExitCode::from(e.code())
        }
    }
}
