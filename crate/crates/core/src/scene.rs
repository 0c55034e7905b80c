//! Scene descriptions: keyframed objects, the marker timeline and proxy
//! volumes.
//!
//! The world is right-handed with +Y up. Object rotations are Euler angles
//! `(yaw, pitch, roll)` in radians applied as yaw about Y, then pitch about X,
//! then roll about Z; an object with zero rotation faces +Z.

use std::collections::{BTreeMap, HashSet};

use glam::{DQuat, DVec3, EulerRot};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PosedShape;

/// Speed below which a track counts as at rest (m/s).
pub const REST_SPEED: f64 = 1e-3;
/// Upper bound on proxy resolution along any axis.
pub const MAX_PROXY_CELLS: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("keyframes of `{0}` are not strictly increasing in time")]
    UnsortedKeyframes(String),
    #[error("marker `{id}` at t={time} is outside [0, {duration}]")]
    MarkerOutOfRange { id: String, time: f64, duration: f64 },
    #[error("`{owner}` references unknown object `{target}`")]
    DanglingTarget { owner: String, target: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Box { half_extents: DVec3 },
    /// Upright capsule; `half_height` is the half length of the core segment.
    Capsule { radius: f64, half_height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub time: f64,
    pub position: DVec3,
    /// `(yaw, pitch, roll)` in radians.
    #[serde(default)]
    pub rotation: DVec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub position: DVec3,
    pub rotation: DVec3,
}

impl Transform {
    pub fn quat(&self) -> DQuat {
        DQuat::from_euler(EulerRot::YXZ, self.rotation.x, self.rotation.y, self.rotation.z)
    }

    pub fn facing(&self) -> DVec3 {
        self.quat() * DVec3::Z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyframeTrack {
    pub keys: Vec<Keyframe>,
}

impl KeyframeTrack {
    pub fn new(keys: Vec<Keyframe>) -> Self {
        Self { keys }
    }

    pub fn constant(position: DVec3, rotation: DVec3) -> Self {
        Self::new(vec![Keyframe {
            time: 0.0,
            position,
            rotation,
        }])
    }

    fn validate(&self, owner: &str) -> Result<(), SceneError> {
        if self.keys.is_empty() {
            return Err(SceneError::Schema(format!("`{owner}` has no keyframes")));
        }
        if self.keys.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(SceneError::UnsortedKeyframes(owner.to_string()));
        }
        Ok(())
    }

    /// Per-segment positional speed, one entry per key pair.
    fn segment_speeds(&self) -> Vec<f64> {
        self.keys
            .windows(2)
            .map(|w| (w[1].position - w[0].position).length() / (w[1].time - w[0].time))
            .collect()
    }
}

/// Piecewise-linear interpolation, clamped outside the key range.
pub fn sample_transform(track: &KeyframeTrack, t: f64) -> Transform {
    let keys = &track.keys;
    let first = keys[0];
    let last = keys[keys.len() - 1];
    if t <= first.time {
        return Transform {
            position: first.position,
            rotation: first.rotation,
        };
    }
    if t >= last.time {
        return Transform {
            position: last.position,
            rotation: last.rotation,
        };
    }
    let i = keys.partition_point(|k| k.time <= t) - 1;
    let (a, b) = (keys[i], keys[i + 1]);
    let s = (t - a.time) / (b.time - a.time);
    Transform {
        position: a.position.lerp(b.position, s),
        rotation: a.rotation.lerp(b.rotation, s),
    }
}

/// Times at which the track comes to rest.
pub fn stop_times(track: &KeyframeTrack) -> Vec<f64> {
    let speeds = track.segment_speeds();
    let mut out = Vec::new();
    for (i, v) in speeds.iter().enumerate() {
        let moving = *v > REST_SPEED;
        let next_moving = speeds.get(i + 1).is_some_and(|n| *n > REST_SPEED);
        if moving && !next_moving {
            out.push(track.keys[i + 1].time);
        }
    }
    out
}

/// Times at which the track starts moving after being at rest.
pub fn motion_start_times(track: &KeyframeTrack) -> Vec<f64> {
    let speeds = track.segment_speeds();
    let mut out = Vec::new();
    for (i, v) in speeds.iter().enumerate() {
        let prev_moving = i > 0 && speeds[i - 1] > REST_SPEED;
        if *v > REST_SPEED && !prev_moving {
            out.push(track.keys[i].time);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
    #[serde(rename = "keys")]
    pub track: KeyframeTrack,
    #[serde(default)]
    pub is_character: bool,
    #[serde(default)]
    pub is_static: bool,
    /// Local offset of the focus point (e.g. the head).
    #[serde(default)]
    pub subject_offset: DVec3,
}

impl SceneObject {
    pub fn transform_at(&self, t: f64) -> Transform {
        sample_transform(&self.track, t)
    }

    pub fn subject_point_at(&self, t: f64) -> DVec3 {
        let tr = self.transform_at(t);
        tr.position + tr.quat() * self.subject_offset
    }

    pub fn posed_shape(&self, t: f64) -> PosedShape {
        let tr = self.transform_at(t);
        let q = tr.quat();
        match self.shape {
            Shape::Box { half_extents } => PosedShape::Box {
                center: tr.position,
                rotation: q,
                half_extents,
            },
            Shape::Capsule {
                radius,
                half_height,
            } => {
                let axis = q * DVec3::new(0.0, half_height, 0.0);
                PosedShape::Capsule {
                    a: tr.position - axis,
                    b: tr.position + axis,
                    radius,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotMarker {
    pub id: String,
    pub time: f64,
    pub targets: Vec<String>,
    #[serde(default = "half")]
    pub dramatisation: f64,
    #[serde(default = "half")]
    pub pace: f64,
    #[serde(default = "yes")]
    pub use_preferences: bool,
    #[serde(default)]
    pub locked: bool,
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyVolume {
    pub min: DVec3,
    pub max: DVec3,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
}

pub const DEFAULT_CELL_SIZE: f64 = 0.25;

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE
}

impl ProxyVolume {
    /// Number of cells along each axis covering `[min, max]`.
    pub fn dims(&self) -> [usize; 3] {
        let ext = (self.max - self.min) / self.cell_size;
        [ext.x, ext.y, ext.z].map(|e| (e - 1e-9).ceil().max(1.0) as usize)
    }

    pub fn contains(&self, p: DVec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }

    fn validate(&self, index: usize) -> Result<(), SceneError> {
        if !self.min.cmplt(self.max).all() {
            return Err(SceneError::Schema(format!("proxy {index}: min must be below max")));
        }
        if !(self.cell_size > 0.0) {
            return Err(SceneError::Schema(format!("proxy {index}: cell_size must be positive")));
        }
        if self.dims().iter().any(|d| *d > MAX_PROXY_CELLS) {
            return Err(SceneError::Schema(format!(
                "proxy {index}: more than {MAX_PROXY_CELLS} cells along an axis"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneDescription {
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub duration: f64,
    /// Sorted by time, strictly increasing.
    pub markers: Vec<ShotMarker>,
    pub proxies: Vec<ProxyVolume>,
}

impl Timeline {
    pub fn marker(&self, id: &str) -> Option<&ShotMarker> {
        self.markers.iter().find(|m| m.id == id)
    }

    pub fn marker_index(&self, id: &str) -> Option<usize> {
        self.markers.iter().position(|m| m.id == id)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    duration: f64,
    objects: Vec<SceneObject>,
    #[serde(default)]
    markers: Vec<ShotMarker>,
    #[serde(default)]
    proxies: Vec<ProxyVolume>,
}

impl SceneDescription {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Replaces the keyframe tracks of the named objects (alternate runtime
    /// behaviour of a dynamic cutscene).
    pub fn with_tracks(&self, overrides: &BTreeMap<String, KeyframeTrack>) -> Result<Self, SceneError> {
        let mut out = self.clone();
        for (id, track) in overrides {
            let obj = out
                .objects
                .iter_mut()
                .find(|o| &o.id == id)
                .ok_or_else(|| SceneError::DanglingTarget {
                    owner: "variant".into(),
                    target: id.clone(),
                })?;
            track.validate(id)?;
            obj.track = track.clone();
        }
        Ok(out)
    }

    /// Centroid of the targets' subject points at time `t`.
    pub fn subject_point(&self, targets: &[String], t: f64) -> Result<DVec3, SceneError> {
        if targets.is_empty() {
            return Err(SceneError::Schema("no targets given".into()));
        }
        let mut sum = DVec3::ZERO;
        for id in targets {
            let obj = self.object(id).ok_or_else(|| SceneError::DanglingTarget {
                owner: "subject".into(),
                target: id.clone(),
            })?;
            sum += obj.subject_point_at(t);
        }
        Ok(sum / targets.len() as f64)
    }
}

/// Free-function form of [`SceneDescription::subject_point`].
pub fn subject_point(scene: &SceneDescription, targets: &[String], t: f64) -> Result<DVec3, SceneError> {
    scene.subject_point(targets, t)
}

/// Parses and validates a scene document.
pub fn parse_scene(bytes: &[u8]) -> Result<(SceneDescription, Timeline), SceneError> {
    let file: SceneFile =
        serde_json::from_slice(bytes).map_err(|e| SceneError::Schema(e.to_string()))?;
    if !(file.duration > 0.0) {
        return Err(SceneError::Schema("duration must be positive".into()));
    }
    let mut ids = HashSet::new();
    for obj in &file.objects {
        if !ids.insert(obj.id.as_str()) {
            return Err(SceneError::DuplicateId(obj.id.clone()));
        }
        let ok = match obj.shape {
            Shape::Box { half_extents } => half_extents.cmpgt(DVec3::ZERO).all(),
            Shape::Capsule {
                radius,
                half_height,
            } => radius > 0.0 && half_height > 0.0,
        };
        if !ok {
            return Err(SceneError::Schema(format!("`{}` has non-positive extents", obj.id)));
        }
        obj.track.validate(&obj.id)?;
    }
    let mut marker_ids = HashSet::new();
    for m in &file.markers {
        if !marker_ids.insert(m.id.as_str()) {
            return Err(SceneError::DuplicateId(m.id.clone()));
        }
        if !(0.0..=file.duration).contains(&m.time) {
            return Err(SceneError::MarkerOutOfRange {
                id: m.id.clone(),
                time: m.time,
                duration: file.duration,
            });
        }
        if m.targets.is_empty() {
            return Err(SceneError::Schema(format!("marker `{}` has no targets", m.id)));
        }
        if let Some(t) = m.targets.iter().find(|t| !ids.contains(t.as_str())) {
            return Err(SceneError::DanglingTarget {
                owner: m.id.clone(),
                target: t.clone(),
            });
        }
        for (field, v) in [("dramatisation", m.dramatisation), ("pace", m.pace)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SceneError::Schema(format!("marker `{}`: {field} {v} outside [0, 1]", m.id)));
            }
        }
    }
    for (i, p) in file.proxies.iter().enumerate() {
        p.validate(i)?;
    }
    let mut markers = file.markers;
    markers.sort_by(|a, b| a.time.total_cmp(&b.time));
    if let Some(w) = markers.windows(2).find(|w| w[1].time <= w[0].time) {
        return Err(SceneError::Schema(format!(
            "markers `{}` and `{}` share a time",
            w[0].id, w[1].id
        )));
    }
    Ok((
        SceneDescription {
            objects: file.objects,
        },
        Timeline {
            duration: file.duration,
            markers,
            proxies: file.proxies,
        },
    ))
}

/// Inverse of [`parse_scene`].
pub fn scene_to_json(scene: &SceneDescription, timeline: &Timeline) -> String {
    let file = SceneFile {
        duration: timeline.duration,
        objects: scene.objects.clone(),
        markers: timeline.markers.clone(),
        proxies: timeline.proxies.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("scene serializes");
    s.push('\n');
    s
}
