//! Ordered, lockable shot plans for every marker, with selective
//! re-simulation and a versioned JSON form.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{RuleParams, TechniqueOverrides};
use crate::dataset::{conditional_probabilities, AggregateStats, CategoryModel};
use crate::placement::{place_camera, MarkerEnv, ShotPlan};
use crate::proxy::{OccupancyGrid, ProxyError};
use crate::rng::{derive_seed, SimRng};
use crate::scene::{SceneDescription, SceneError, Timeline};

pub const STORYBOARD_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoryboardError {
    #[error("storyboard version error: {0}")]
    Version(String),
    #[error("storyboard schema error: {0}")]
    Schema(String),
    #[error("marker `{0}` is locked")]
    LockedTarget(String),
    #[error("unknown marker `{0}`")]
    UnknownMarker(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub params: RuleParams,
    #[serde(default)]
    pub techniques: TechniqueOverrides,
    pub dataset_path: String,
    pub scene_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoryboardNode {
    pub plan: ShotPlan,
    pub locked: bool,
    pub preview_ref: String,
    pub simulation_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Storyboard {
    pub version: u32,
    pub config: SimulationConfig,
    /// One per marker, in marker time order.
    pub nodes: Vec<StoryboardNode>,
    /// Retained nodes whose predecessor changed after they were simulated.
    #[serde(default)]
    pub stale_markers: Vec<String>,
}

impl Storyboard {
    pub fn node(&self, marker_id: &str) -> Option<&StoryboardNode> {
        self.nodes.iter().find(|n| n.plan.marker_id == marker_id)
    }

    fn index_of(&self, marker_id: &str) -> Result<usize, StoryboardError> {
        self.nodes
            .iter()
            .position(|n| n.plan.marker_id == marker_id)
            .ok_or_else(|| StoryboardError::UnknownMarker(marker_id.to_string()))
    }
}

pub fn preview_ref(marker_id: &str) -> String {
    format!("previews/{marker_id}.svg")
}

/// Everything a simulation reads, prepared once and shared across runs.
#[derive(Debug, Clone)]
pub struct SimulationInputs {
    pub scene: SceneDescription,
    pub timeline: Timeline,
    pub grids: Vec<Arc<OccupancyGrid>>,
    pub envs: Vec<MarkerEnv>,
    pub stats: AggregateStats,
    pub model: CategoryModel,
}

impl SimulationInputs {
    /// `grids` must hold one grid per marker, in marker order.
    pub fn new(
        scene: SceneDescription,
        timeline: Timeline,
        grids: Vec<OccupancyGrid>,
        stats: AggregateStats,
        params: &RuleParams,
        overrides: &TechniqueOverrides,
    ) -> Result<Self, StoryboardError> {
        if grids.len() != timeline.markers.len()
            || grids.iter().zip(&timeline.markers).any(|(g, m)| g.marker_id != m.id)
        {
            return Err(StoryboardError::Schema("grids do not match the timeline markers".into()));
        }
        let grids: Vec<_> = grids.into_iter().map(Arc::new).collect();
        let envs = timeline
            .markers
            .iter()
            .zip(&grids)
            .map(|(m, g)| MarkerEnv::new(&scene, m, Arc::clone(g), params, overrides))
            .collect::<Result<Vec<_>, _>>()?;
        let model = conditional_probabilities(&stats);
        Ok(Self {
            scene,
            timeline,
            grids,
            envs,
            stats,
            model,
        })
    }

    /// Same scene and grids with different parameters.
    pub fn with_params(&self, params: &RuleParams, overrides: &TechniqueOverrides) -> Result<Self, StoryboardError> {
        let envs = self
            .timeline
            .markers
            .iter()
            .zip(&self.grids)
            .map(|(m, g)| MarkerEnv::new(&self.scene, m, Arc::clone(g), params, overrides))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            envs,
            ..self.clone()
        })
    }

    fn simulate_node(&self, index: usize, seed: u64, previous: Option<&ShotPlan>, next: Option<&ShotPlan>) -> StoryboardNode {
        let node_seed = derive_seed(seed, index as u64);
        let mut rng = SimRng::new(node_seed);
        let env = &self.envs[index];
        let plan = place_camera(env, previous, next, &self.model, &self.stats, &mut rng);
        StoryboardNode {
            preview_ref: preview_ref(&plan.marker_id),
            plan,
            locked: env.marker.locked,
            simulation_seed: node_seed,
        }
    }
}

/// Simulates every marker in time order, each seeing its predecessor's plan.
pub fn simulate_all(inputs: &SimulationInputs, config: SimulationConfig) -> Storyboard {
    let mut nodes: Vec<StoryboardNode> = Vec::with_capacity(inputs.envs.len());
    for i in 0..inputs.envs.len() {
        let node = inputs.simulate_node(i, config.seed, nodes.last().map(|n| &n.plan), None);
        nodes.push(node);
    }
    Storyboard {
        version: STORYBOARD_VERSION,
        config,
        nodes,
        stale_markers: Vec::new(),
    }
}

/// Re-simulates the requested markers. Every other node is copied unchanged;
/// re-simulated nodes respect both retained neighbors.
pub fn resimulate(
    storyboard: &Storyboard,
    inputs: &SimulationInputs,
    marker_ids: &BTreeSet<String>,
    seed: u64,
) -> Result<Storyboard, StoryboardError> {
    let mut targets = BTreeSet::new();
    for id in marker_ids {
        let i = storyboard.index_of(id)?;
        if storyboard.nodes[i].locked {
            return Err(StoryboardError::LockedTarget(id.clone()));
        }
        targets.insert(i);
    }
    if storyboard.nodes.len() != inputs.envs.len() {
        return Err(StoryboardError::Schema("storyboard does not match the scene markers".into()));
    }
    let mut out = storyboard.clone();
    if targets.is_empty() {
        return Ok(out);
    }
    for &i in &targets {
        let (before, after) = out.nodes.split_at(i);
        let previous = before.last().map(|n| &n.plan);
        let next = after
            .get(1)
            .filter(|_| !targets.contains(&(i + 1)))
            .map(|n| &n.plan);
        let mut node = inputs.simulate_node(i, seed, previous, next);
        node.locked = false;
        out.nodes[i] = node;
    }
    let mut stale: BTreeSet<usize> = out
        .stale_markers
        .iter()
        .filter_map(|id| out.index_of(id).ok())
        .filter(|i| !targets.contains(i))
        .collect();
    for &i in &targets {
        if i + 1 < out.nodes.len() && !targets.contains(&(i + 1)) {
            stale.insert(i + 1);
        }
    }
    out.stale_markers = stale.into_iter().map(|i| out.nodes[i].plan.marker_id.clone()).collect();
    Ok(out)
}

pub fn set_locked(storyboard: &mut Storyboard, marker_ids: &BTreeSet<String>, locked: bool) -> Result<(), StoryboardError> {
    let indices = marker_ids
        .iter()
        .map(|id| storyboard.index_of(id))
        .collect::<Result<Vec<_>, _>>()?;
    for i in indices {
        storyboard.nodes[i].locked = locked;
    }
    Ok(())
}

/// Canonical pretty JSON; floats are quantized when plans are built, so a
/// load/save cycle reproduces the bytes.
pub fn save_storyboard(storyboard: &Storyboard) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(storyboard).expect("storyboard serializes");
    out.push(b'\n');
    out
}

pub fn load_storyboard(bytes: &[u8]) -> Result<Storyboard, StoryboardError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| StoryboardError::Schema(e.to_string()))?;
    let version = value
        .get("version")
        .ok_or_else(|| StoryboardError::Schema("missing `version`".into()))?;
    if version.as_u64() != Some(u64::from(STORYBOARD_VERSION)) {
        return Err(StoryboardError::Version(format!(
            "expected version {STORYBOARD_VERSION}, found {version}"
        )));
    }
    serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown field") {
            StoryboardError::Version(msg)
        } else {
            StoryboardError::Schema(msg)
        }
    })
}
