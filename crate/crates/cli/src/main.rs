use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmrecon::fixtures::{build_scene, fixture_suite, observe, randomized_scenes, FixtureShape, Pose};
use mmrecon::geometry::{load_mesh, sample_surface};
use mmrecon::imaging::{backproject, threshold_image, write_volume, DEFAULT_THRESHOLD_PERCENTILE};
use mmrecon::io::{read_cloud_ply, write_cloud_ply, write_json};
use mmrecon::metrics::{evaluate_run, EvalMeta};
use mmrecon::pipeline::{
    benchmark, export_training_set, generate_corpus, make_completer, run_pipeline, write_scene,
    CompleterKind, PipelineConfig, RunOptions, MANIFEST_FILE, SCENE_GROUND_TRUTH, SCENE_SIGNALS,
};
use mmrecon::radar::{read_signals, write_signals};
use mmrecon::{Error, Point3, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_PROTOCOL: u8 = 4;

/// Occluded-object reconstruction from simulated mmWave radar.
#[derive(Debug, Parser)]
#[command(name = "mmrecon", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Completion backend, `baseline` or `external`.
    #[arg(long, global = true)]
    completer: Option<CompleterKind>,
    /// Exchange directory of the external completer.
    #[arg(long, global = true)]
    exchange_dir: Option<PathBuf>,
    /// Keep per-stage products under `<out>/intermediates`.
    #[arg(long, global = true)]
    keep_intermediates: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build partial/full training pairs from a directory of meshes.
    SynthData {
        #[arg(long)]
        meshes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate radar scenes, each written as a directory of signals and ground truth.
    Simulate(SimulateArgs),
    /// Backproject signals onto the configured grid.
    Image {
        #[arg(long)]
        signals: PathBuf,
        /// Output complex volume.
        #[arg(long)]
        out: PathBuf,
        /// Also write voxels above this magnitude percentile as a PLY cloud.
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_PERCENTILE)]
        percentile: f64,
    },
    /// Run the full reconstruction on one signal file.
    Reconstruct {
        #[arg(long)]
        signals: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reuse intermediates from an earlier run in the same directory.
        #[arg(long)]
        resume: bool,
        /// Confidence percentile of the normal field.
        #[arg(long)]
        percentile: Option<f64>,
    },
    /// Score a reconstruction against ground truth and print the report.
    Evaluate {
        #[arg(long)]
        prediction: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Observed partial for the coverage figure; the prediction when omitted.
        #[arg(long)]
        partial: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct and score every scene directory under `scenes`.
    Benchmark {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resample a generated corpus to fixed point counts for training.
    ExportTrain {
        /// Corpus directory or its manifest file.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2048)]
        partial_points: usize,
        #[arg(long, default_value_t = 16384)]
        full_points: usize,
    },
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SceneSource,
    #[arg(long)]
    out: PathBuf,
    /// Longest dimension in meters for `--mesh`.
    #[arg(long, default_value_t = 0.15)]
    size: f64,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct SceneSource {
    /// One fixture shape: sphere, cube, cylinder or l-bracket.
    #[arg(long)]
    shape: Option<FixtureShape>,
    /// A mesh file, centered and scaled to `--size`.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// All four fixture shapes, unrotated.
    #[arg(long)]
    suite: bool,
    /// This many fixture scenes with random poses.
    #[arg(long)]
    random: Option<usize>,
}

fn load_config(global: &GlobalArgs) -> Result<PipelineConfig> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(kind) = global.completer {
        config.completer.kind = kind;
    }
    if let Some(dir) = &global.exchange_dir {
        config.completer.exchange_dir = Some(dir.clone());
    }
    config.validate()?;
    Ok(config)
}

fn options(global: &GlobalArgs, out: &Path) -> RunOptions {
    RunOptions {
        keep_intermediates: global.keep_intermediates,
        ..RunOptions::writing_to(out)
    }
}

fn simulate(args: &SimulateArgs, config: &PipelineConfig) -> Result<()> {
    let scene = &config.scene;
    let seed = config.seed;
    let source = &args.source;
    if let Some(path) = &source.mesh {
        if !(args.size > 0.0) {
            return Err(Error::Config(format!("size must be positive, got {}", args.size)));
        }
        let cloud = sample_surface(&load_mesh(path)?, scene.points, seed)?;
        let (lo, hi) = cloud.bounds().ok_or(Error::EmptyCloud)?;
        let center = (lo.coords + hi.coords) / 2.0;
        let scale = args.size / cloud.longest_dimension();
        let gt = cloud.map(|p| Point3::from((p.coords - center) * scale), |n| *n);
        std::fs::create_dir_all(&args.out)?;
        write_signals(args.out.join(SCENE_SIGNALS), &observe(&gt, scene, seed)?)?;
        return write_cloud_ply(args.out.join(SCENE_GROUND_TRUTH), &gt);
    }
    let scenes = if let Some(shape) = source.shape {
        vec![build_scene(shape.name(), shape, Pose::default(), scene, seed)?]
    } else if let Some(n) = source.random {
        randomized_scenes(n, scene, seed)?
    } else {
        fixture_suite(scene, seed)?
    };
    if source.shape.is_some() {
        return write_scene(&args.out, &scenes[0]);
    }
    for s in &scenes {
        write_scene(args.out.join(&s.object_id), s)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let global = &cli.global;
    let config = load_config(global)?;
    match cli.command {
        Command::SynthData { meshes, out } => {
            let summary = generate_corpus(&meshes, &out, &config.corpus, config.seed)?;
            for (path, why) in &summary.skipped {
                log::warn!("skipped {}: {why}", path.display());
            }
            println!(
                "{} pairs written to {}, {} meshes skipped",
                summary.records.len(),
                out.display(),
                summary.skipped.len()
            );
        }
        Command::Simulate(args) => simulate(&args, &config)?,
        Command::Image {
            signals,
            out,
            cloud,
            percentile,
        } => {
            let volume = backproject(&read_signals(&signals)?, &config.grid);
            write_volume(&out, &volume)?;
            if let Some(path) = cloud {
                write_cloud_ply(path, &threshold_image(&volume, percentile)?)?;
            }
        }
        Command::Reconstruct {
            signals,
            out,
            resume,
            percentile,
        } => {
            let mut config = config;
            if let Some(p) = percentile {
                config.proposal.confidence_percentile = p;
                config.validate()?;
            }
            let completer = make_completer(&config.completer)?;
            let options = RunOptions {
                resume,
                ..options(global, &out)
            };
            let output = run_pipeline(&read_signals(&signals)?, &config, completer.as_ref(), &options)?;
            println!(
                "chose candidate {} of {} by the {:?} branch",
                output.report.chosen_source_index,
                output.candidates.partials().len(),
                output.report.branch
            );
        }
        Command::Evaluate {
            prediction,
            ground_truth,
            partial,
            out,
        } => {
            let pred = read_cloud_ply(&prediction)?;
            let gt = read_cloud_ply(&ground_truth)?;
            let partial = match partial {
                Some(p) => read_cloud_ply(p)?,
                None => pred.clone(),
            };
            let id = prediction
                .parent()
                .and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let meta = EvalMeta {
                threshold: config.metric_threshold,
                ..EvalMeta::for_object(id, &gt)
            };
            let report = evaluate_run(&pred, &gt, &partial, &meta)?;
            if let Some(path) = out {
                write_json(path, &report)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Benchmark { scenes, out } => {
            let completer = make_completer(&config.completer)?;
            let summary = benchmark(&scenes, &out, &config, completer.as_ref())?;
            let a = &summary.aggregate;
            println!(
                "{} scenes, {} failed: chamfer {:.4} precision {:.3} recall {:.3} f-score {:.3}",
                a.scenes, a.failed, a.overall.chamfer, a.overall.precision, a.overall.recall, a.overall.fscore
            );
        }
        Command::ExportTrain {
            corpus,
            out,
            partial_points,
            full_points,
        } => {
            let manifest = if corpus.is_dir() { corpus.join(MANIFEST_FILE) } else { corpus };
            let records = export_training_set(&manifest, &out, partial_points, full_points)?;
            println!("{} pairs exported to {}", records.len(), out.display());
        }
        Command::Config => print!("{}", config.to_toml()?),
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config() {
        EXIT_CONFIG
    } else if err.is_protocol() {
        EXIT_PROTOCOL
    } else {
        EXIT_STAGE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
