//! `dircam`: dataset tools, proxy baking, simulation, storyboard editing,
//! playback and the local API server.
//!
//! Exit status is 0 on success, 1 on domain errors and 2 on usage errors.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dircam_core::dataset::{
    aggregate, conditional_probabilities, cross_validate, feature_importance, load_director_profile, synthesize_dataset,
    train_discriminator, accuracy, Category, SynthSpec, TechniqueId, TrainConfig,
};
use dircam_core::playback::{execute, export_track, PlaybackConfig, TrackFormat};
use dircam_core::project::{read_file, sha256_hex, write_demo_project, write_file, DemoKind, Project, PROJECT_FILE};
use dircam_core::proxy::bake;
use dircam_core::scene::{parse_scene, KeyframeTrack};
use dircam_core::storyboard::{load_storyboard, resimulate, save_storyboard, set_locked, simulate_all, Storyboard};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dircam", version, about = "Director-style procedural cutscene cinematography")]
struct Cli {
    /// Project config file.
    #[arg(long, global = true, default_value = PROJECT_FILE)]
    project: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an example project (scene, director dataset, config) into DIR.
    Init {
        dir: PathBuf,
        /// Use the six-marker stress scene and rule-heavy director.
        #[arg(long)]
        stress: bool,
    },
    /// Director dataset tools.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Voxelize the scene around every marker and write grid caches.
    Bake {
        #[arg(long)]
        force_bake: bool,
    },
    /// Simulate every marker; writes storyboard.json and previews.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force_bake: bool,
    },
    /// Re-simulate selected markers, keeping all others bit-exact.
    Resim {
        #[arg(long, value_delimiter = ',', required = true)]
        markers: Vec<String>,
        /// Defaults to the storyboard seed plus one.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Lock (or unlock) storyboard nodes against re-simulation.
    Lock {
        #[arg(long, value_delimiter = ',', required = true)]
        markers: Vec<String>,
        #[arg(long)]
        unlock: bool,
    },
    /// Execute a storyboard into a per-frame camera track.
    Play {
        #[arg(long)]
        storyboard: Option<PathBuf>,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long)]
        out: PathBuf,
        /// JSON object mapping object ids to replacement keyframe lists.
        #[arg(long)]
        variant: Option<PathBuf>,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
    },
    /// Serve the project over HTTP on localhost.
    Serve {
        #[arg(long, env = dircam_service::PORT_ENV, default_value_t = dircam_service::DEFAULT_PORT)]
        port: u16,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Technique frequencies and style means.
    Stats { dataset: PathBuf },
    /// Conditional technique probabilities per category.
    Probs { dataset: PathBuf },
    /// Generate the synthetic two-director dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        clips: Option<usize>,
    },
    /// Train and cross-validate the two-director discriminator.
    Discriminate {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Writes a line to stdout; a closed pipe (e.g. `| head`) ends the process quietly.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = writeln!(std::io::stdout().lock(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            panic!("stdout: {e}");
        }
    }};
}

fn print_json(v: &serde_json::Value) {
    out!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn dataset(cmd: DatasetCommand) -> Result<()> {
    match cmd {
        DatasetCommand::Stats { dataset } => {
            let profile = load_director_profile(&read_file(&dataset)?)?;
            let stats = aggregate(&profile);
            let techniques: serde_json::Map<String, serde_json::Value> = TechniqueId::ALL
                .iter()
                .map(|t| {
                    (
                        t.key().to_string(),
                        json!({
                            "frequency": stats.frequency(*t),
                            "meanDramatisation": stats.mean_dramatisation.get(t),
                            "meanPace": stats.mean_pace.get(t),
                        }),
                    )
                })
                .collect();
            print_json(&json!({
                "director": profile.director,
                "clips": stats.clip_count,
                "techniques": techniques,
            }));
        }
        DatasetCommand::Probs { dataset } => {
            let stats = aggregate(&load_director_profile(&read_file(&dataset)?)?);
            let model = conditional_probabilities(&stats);
            let out: serde_json::Map<String, serde_json::Value> = Category::ORDER
                .iter()
                .map(|c| {
                    let members: serde_json::Map<String, serde_json::Value> = c
                        .members()
                        .iter()
                        .map(|t| (t.key().to_string(), json!(model.probability(*c, *t))))
                        .collect();
                    (c.to_string(), serde_json::Value::Object(members))
                })
                .collect();
            print_json(&serde_json::Value::Object(out));
        }
        DatasetCommand::Synth { out, seed, clips } => {
            let mut spec = SynthSpec::default();
            if let Some(n) = clips {
                spec.clips_per_director = n;
            }
            let (a, b) = synthesize_dataset(&spec, seed);
            for p in [a, b] {
                let path = out.join(format!("{}.json", p.director));
                write_file(&path, p.to_json().as_bytes())?;
                out!("{}", path.display());
            }
        }
        DatasetCommand::Discriminate { a, b, folds, seed } => {
            let pa = load_director_profile(&read_file(&a)?)?;
            let pb = load_director_profile(&read_file(&b)?)?;
            let config = TrainConfig {
                seed,
                ..Default::default()
            };
            let cv = cross_validate(&pa.clips, &pb.clips, folds, &config)?;
            let model = train_discriminator(&pa.director, &pa.clips, &pb.director, &pb.clips, &config)?;
            let importance: Vec<_> = feature_importance(&model)
                .into_iter()
                .map(|(t, w)| json!([t.key(), w]))
                .collect();
            print_json(&json!({
                "directors": [pa.director, pb.director],
                "folds": folds,
                "crossValidatedAccuracy": cv,
                "trainingAccuracy": accuracy(&model, &pa.clips, &pb.clips),
                "importance": importance,
            }));
        }
    }
    Ok(())
}

fn node_line(sb: &Storyboard) {
    for n in &sb.nodes {
        let p = &n.plan;
        let techniques: Vec<&str> = Category::ORDER.iter().map(|c| p.technique(*c).key()).collect();
        out!(
            "{}\tt={}\t{}\tattempts={}{}{}",
            p.marker_id,
            p.time,
            techniques.join("/"),
            p.attempts,
            if p.degraded { "\tdegraded" } else { "" },
            if n.locked { "\tlocked" } else { "" },
        );
    }
    if !sb.stale_markers.is_empty() {
        eprintln!("warning: stale neighbors (predecessor changed): {}", sb.stale_markers.join(","));
    }
}

fn load(project: &Path) -> Result<Project> {
    Project::load(project).with_context(|| format!("loading project {}", project.display()))
}

fn play(
    project_path: &Path,
    storyboard: Option<PathBuf>,
    scene: Option<PathBuf>,
    fps: f64,
    out: PathBuf,
    variant: Option<PathBuf>,
    format: &str,
) -> Result<()> {
    let project = if project_path.exists() { Some(load(project_path)?) } else { None };
    let sb = match (&storyboard, &project) {
        (Some(path), _) => load_storyboard(&read_file(path)?)?,
        (None, Some(p)) => p.load_storyboard()?,
        (None, None) => bail!("no project at {}; pass --storyboard and --scene", project_path.display()),
    };
    let (scene, timeline, grids) = match (&scene, &project) {
        (Some(path), p) => {
            let bytes = read_file(path)?;
            let (scene, timeline) = parse_scene(&bytes)?;
            let grids = match p {
                Some(p) if p.scene_sha256 == sha256_hex(&bytes) => p.grids(false)?.0,
                _ => bake(&scene, &timeline)?,
            };
            (scene, timeline, grids)
        }
        (None, Some(p)) => (p.scene.clone(), p.timeline.clone(), p.grids(false)?.0),
        (None, None) => bail!("no project at {}; pass --scene", project_path.display()),
    };
    let scene = match variant {
        Some(path) => {
            let tracks: BTreeMap<String, KeyframeTrack> =
                serde_json::from_slice(&read_file(&path)?).with_context(|| format!("parsing variant {}", path.display()))?;
            scene.with_tracks(&tracks)?
        }
        None => scene,
    };
    let config = PlaybackConfig {
        fps,
        lead_time: sb.config.params.lead_time,
        noise_seed: sb.config.seed,
        ..Default::default()
    };
    let track = execute(&sb, &scene, &timeline, &grids, &config)?;
    let format: TrackFormat = format.parse()?;
    write_file(&out, &export_track(&track, format))?;
    out!("{} frames -> {}", track.frames.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Init { dir, stress } => {
            let kind = if stress { DemoKind::Stress } else { DemoKind::Demo };
            out!("{}", write_demo_project(&dir, kind)?.display());
        }
        Command::Dataset { command } => dataset(command)?,
        Command::Bake { force_bake } => {
            let project = load(&cli.project)?;
            let (grids, baked) = project.grids(force_bake)?;
            for g in &grids {
                out!(
                    "{}\t{}x{}x{}\toccupied={}",
                    g.marker_id, g.dims[0], g.dims[1], g.dims[2], g.occupied_count()
                );
            }
            out!("{} {}", if baked { "baked" } else { "cached" }, project.grid_dir().display());
        }
        Command::Simulate { seed, force_bake } => {
            let project = load(&cli.project)?;
            let (grids, _) = project.grids(force_bake)?;
            let inputs = project.inputs(grids)?;
            let sb = simulate_all(&inputs, project.simulation_config(seed.unwrap_or(project.config.seed)));
            project.save_outputs(&sb, None)?;
            node_line(&sb);
            out!("wrote {}", project.storyboard_path().display());
        }
        Command::Resim { markers, seed } => {
            let project = load(&cli.project)?;
            let sb = project.load_storyboard()?;
            let (grids, _) = project.grids(false)?;
            let inputs = project.inputs(grids)?;
            let ids: BTreeSet<String> = markers.into_iter().collect();
            let seed = seed.unwrap_or(sb.config.seed.wrapping_add(1));
            let out = resimulate(&sb, &inputs, &ids, seed)?;
            let only: Vec<String> = ids.into_iter().collect();
            project.save_outputs(&out, Some(&only))?;
            node_line(&out);
        }
        Command::Lock { markers, unlock } => {
            let project = load(&cli.project)?;
            let mut sb = project.load_storyboard()?;
            let ids: BTreeSet<String> = markers.into_iter().collect();
            set_locked(&mut sb, &ids, !unlock)?;
            write_file(&project.storyboard_path(), &save_storyboard(&sb))?;
            node_line(&sb);
        }
        Command::Play {
            storyboard,
            scene,
            fps,
            out,
            variant,
            format,
        } => play(&cli.project, storyboard, scene, fps, out, variant, &format)?,
        Command::Serve { port } => {
            if let Err(e) = dircam_service::run(&cli.project, port) {
                bail!("{e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
