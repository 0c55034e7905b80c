//! On-disk projects: a `cineai.json` config naming a scene and a director
//! dataset, plus an output directory holding grid caches, the storyboard
//! and previews.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{validate_overrides, ParamsError, RuleParams, TechniqueOverrides};
use crate::dataset::{aggregate, load_director_profile, AggregateStats, DatasetError, DirectorProfile};
use crate::demo;
use crate::preview::render_preview;
use crate::proxy::{bake, deserialize_grid, serialize_grid, OccupancyGrid, ProxyError};
use crate::scene::{parse_scene, scene_to_json, SceneDescription, SceneError, Timeline};
use crate::storyboard::{load_storyboard, save_storyboard, SimulationConfig, SimulationInputs, Storyboard, StoryboardError};

pub const PROJECT_FILE: &str = "cineai.json";
pub const PREVIEW_WIDTH: u32 = 480;
pub const PREVIEW_HEIGHT: u32 = 270;
const GRID_MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("project config: {0}")]
    Config(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("proxy: {0}")]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Storyboard(#[from] StoryboardError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, ProjectError> {
    fs::read(path).map_err(io_err(path))
}

/// Writes through a sibling temporary file so readers never see a partial
/// file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ProjectError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProjectConfig {
    pub scene_path: String,
    pub dataset_path: String,
    #[serde(default)]
    pub seed: u64,
    /// Partial [`RuleParams`] applied on top of the defaults.
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub techniques: TechniqueOverrides,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct GridManifest {
    scene_sha256: String,
    markers: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Project {
    pub config_path: PathBuf,
    pub root: PathBuf,
    pub config: ProjectConfig,
    pub params: RuleParams,
    pub scene: SceneDescription,
    pub timeline: Timeline,
    pub profile: DirectorProfile,
    pub stats: AggregateStats,
    pub scene_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Project {
    pub fn load(config_path: &Path) -> Result<Self, ProjectError> {
        let bytes = read_file(config_path)?;
        let config: ProjectConfig =
            serde_json::from_slice(&bytes).map_err(|e| ProjectError::Config(e.to_string()))?;
        let root = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let params = RuleParams::default().patched(&serde_json::Value::Object(config.params.clone()))?;
        validate_overrides(&config.techniques)?;
        let scene_bytes = read_file(&root.join(&config.scene_path))?;
        let (scene, timeline) = parse_scene(&scene_bytes)?;
        let profile = load_director_profile(&read_file(&root.join(&config.dataset_path))?)?;
        let stats = aggregate(&profile);
        Ok(Self {
            config_path: config_path.to_path_buf(),
            root,
            config,
            params,
            scene,
            timeline,
            profile,
            stats,
            scene_sha256: sha256_hex(&scene_bytes),
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.root.join(&self.config.output_dir)
    }

    pub fn storyboard_path(&self) -> PathBuf {
        self.output_dir().join("storyboard.json")
    }

    /// Directory that preview references (`previews/<id>.svg`) resolve in.
    pub fn preview_root(&self) -> PathBuf {
        self.output_dir()
    }

    pub fn grid_dir(&self) -> PathBuf {
        self.output_dir().join("grids")
    }

    fn cached_grids(&self) -> Option<Vec<OccupancyGrid>> {
        let dir = self.grid_dir();
        let manifest: GridManifest = serde_json::from_slice(&fs::read(dir.join(GRID_MANIFEST)).ok()?).ok()?;
        let ids: Vec<String> = self.timeline.markers.iter().map(|m| m.id.clone()).collect();
        if manifest.scene_sha256 != self.scene_sha256 || manifest.markers != ids {
            return None;
        }
        ids.iter()
            .map(|id| {
                let g = deserialize_grid(&fs::read(dir.join(format!("{id}.ogrd"))).ok()?).ok()?;
                (g.marker_id == *id).then_some(g)
            })
            .collect()
    }

    /// Grids for every marker, reused from the cache when the scene file
    /// hash matches. Returns whether a bake happened.
    pub fn grids(&self, force: bool) -> Result<(Vec<OccupancyGrid>, bool), ProjectError> {
        if !force {
            if let Some(g) = self.cached_grids() {
                return Ok((g, false));
            }
        }
        let grids = bake(&self.scene, &self.timeline)?;
        let dir = self.grid_dir();
        for g in &grids {
            write_file(&dir.join(format!("{}.ogrd", g.marker_id)), &serialize_grid(g))?;
        }
        let manifest = GridManifest {
            scene_sha256: self.scene_sha256.clone(),
            markers: grids.iter().map(|g| g.marker_id.clone()).collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        write_file(&dir.join(GRID_MANIFEST), &bytes)?;
        Ok((grids, true))
    }

    pub fn inputs(&self, grids: Vec<OccupancyGrid>) -> Result<SimulationInputs, ProjectError> {
        Ok(SimulationInputs::new(
            self.scene.clone(),
            self.timeline.clone(),
            grids,
            self.stats.clone(),
            &self.params,
            &self.config.techniques,
        )?)
    }

    pub fn simulation_config(&self, seed: u64) -> SimulationConfig {
        SimulationConfig {
            seed,
            params: self.params.clone(),
            techniques: self.config.techniques.clone(),
            dataset_path: self.config.dataset_path.clone(),
            scene_path: self.config.scene_path.clone(),
        }
    }

    pub fn load_storyboard(&self) -> Result<Storyboard, ProjectError> {
        Ok(load_storyboard(&read_file(&self.storyboard_path())?)?)
    }

    /// Writes `storyboard.json` and any previews of nodes listed in `only`
    /// (all nodes when `None`).
    pub fn save_outputs(&self, storyboard: &Storyboard, only: Option<&[String]>) -> Result<(), ProjectError> {
        write_file(&self.storyboard_path(), &save_storyboard(storyboard))?;
        for node in &storyboard.nodes {
            if only.is_some_and(|ids| !ids.contains(&node.plan.marker_id)) {
                continue;
            }
            let svg = render_preview(&node.plan, &self.scene, PREVIEW_WIDTH, PREVIEW_HEIGHT);
            write_file(&self.preview_root().join(&node.preview_ref), svg.as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoKind {
    Demo,
    Stress,
}

/// Writes a self-contained example project and returns its config path.
pub fn write_demo_project(dir: &Path, kind: DemoKind) -> Result<PathBuf, ProjectError> {
    let ((scene, timeline), profile) = match kind {
        DemoKind::Demo => (demo::demo_scene(), demo::demo_profile()),
        DemoKind::Stress => (demo::stress_scene(), demo::stress_profile()),
    };
    write_file(&dir.join("scene.json"), scene_to_json(&scene, &timeline).as_bytes())?;
    write_file(&dir.join("director.json"), profile.to_json().as_bytes())?;
    let config = ProjectConfig {
        scene_path: "scene.json".into(),
        dataset_path: "director.json".into(),
        seed: 0,
        params: Default::default(),
        techniques: Default::default(),
        output_dir: default_output_dir(),
    };
    let mut bytes = serde_json::to_vec_pretty(&config).expect("config serializes");
    bytes.push(b'\n');
    let path = dir.join(PROJECT_FILE);
    write_file(&path, &bytes)?;
    Ok(path)
}
