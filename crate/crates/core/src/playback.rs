//! Runtime execution of a storyboard into a per-frame camera track.
//!
//! Each marker starts with a cut to its planned pose. Until the next marker
//! the plan's Look, Tracking and FX techniques drive the camera, leading
//! subjects is enforced on moving cameras, and frames that penetrate the
//! marker's occupancy grid are pushed back into free space.

use std::borrow::Borrow;
use std::fmt::Write as _;
use std::str::FromStr;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Category, Technique};
use crate::math::{camera_basis, quantize, quantize_vec, smoothstep};
use crate::placement::{ShotPlan, CAMERA_RADIUS, DEFAULT_CLOSE_UP_ZOOM, DEFAULT_QUICK_ZOOM};
use crate::proxy::OccupancyGrid;
use crate::rng::{derive_seed, SimRng};
use crate::scene::{motion_start_times, stop_times, SceneDescription, SceneError, Timeline};
use crate::storyboard::Storyboard;

/// How far, in cells, collision push-out searches before giving up.
pub const MAX_PUSH_CELLS: f64 = 8.0;

const NOISE_WEIGHTS: [f64; 3] = [0.5, 0.3, 0.2];
/// Pairwise irrational ratios keep the noise from repeating.
const NOISE_RATIOS: [f64; 3] = [1.0, std::f64::consts::SQRT_2, 1.618_033_988_749_895];

#[derive(Debug, Error)]
pub enum PlaybackError {
    #[error("invalid playback config: {0}")]
    Config(String),
    #[error("storyboard has no nodes")]
    EmptyStoryboard,
    #[error("no occupancy grid for marker `{0}`")]
    MissingGrid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("track parse error: {0}")]
    Parse(String),
}

/// No free position within [`MAX_PUSH_CELLS`] cells along any axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("camera trapped inside occupied cells")]
pub struct Trapped;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct PlaybackConfig {
    pub fps: f64,
    pub slow_mo_factor: f64,
    pub handheld_amplitude: f64,
    pub handheld_frequency: f64,
    pub steadycam_smoothing_time: f64,
    pub quick_zoom_duration: f64,
    pub dolly_zoom_travel: f64,
    pub lead_time: f64,
    pub noise_seed: u64,
}

impl Default for PlaybackConfig {
    fn default() -> Self {
        Self {
            fps: 30.0,
            slow_mo_factor: 0.4,
            handheld_amplitude: 0.02,
            handheld_frequency: 2.5,
            steadycam_smoothing_time: 0.5,
            quick_zoom_duration: 0.25,
            dolly_zoom_travel: 2.0,
            lead_time: 0.3,
            noise_seed: 0,
        }
    }
}

impl PlaybackConfig {
    pub fn validate(&self) -> Result<(), PlaybackError> {
        let positive = [
            ("fps", self.fps),
            ("slowMoFactor", self.slow_mo_factor),
            ("handheldFrequency", self.handheld_frequency),
            ("steadycamSmoothingTime", self.steadycam_smoothing_time),
            ("quickZoomDuration", self.quick_zoom_duration),
            ("dollyZoomTravel", self.dolly_zoom_travel),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlaybackError::Config(format!("{name} must be positive")));
            }
        }
        if self.slow_mo_factor > 1.0 {
            return Err(PlaybackError::Config("slowMoFactor must be at most 1".into()));
        }
        for (name, v) in [("handheldAmplitude", self.handheld_amplitude), ("leadTime", self.lead_time)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlaybackError::Config(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFrame {
    pub wall_time: f64,
    pub scene_time: f64,
    pub position: DVec3,
    /// Unit look direction.
    pub direction: DVec3,
    pub up: DVec3,
    /// Vertical field of view, radians.
    pub fov: f64,
    pub time_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraTrack {
    pub fps: f64,
    /// Wall times of the cut that opens each non-empty segment.
    pub cut_times: Vec<f64>,
    /// Index into the storyboard nodes for each frame.
    pub segment_of_frame: Vec<usize>,
    pub frames: Vec<CameraFrame>,
}

/// Critically damped follow of a moving target (exact for a target that is
/// constant over the step).
#[derive(Debug, Clone, Copy)]
struct Follow {
    position: DVec3,
    velocity: DVec3,
    omega: f64,
}

impl Follow {
    fn step(&mut self, target: DVec3, dt: f64) {
        let delta = self.position - target;
        let temp = (self.velocity + delta * self.omega) * dt;
        let decay = (-self.omega * dt).exp();
        self.velocity = (self.velocity - temp * self.omega) * decay;
        self.position = target + (delta + temp) * decay;
    }
}

/// Sum of three seeded sinusoids per axis.
#[derive(Debug, Clone)]
struct HandheldNoise {
    phases: [[f64; 3]; 3],
    amplitude: f64,
    frequency: f64,
}

impl HandheldNoise {
    fn new(seed: u64, amplitude: f64, frequency: f64) -> Self {
        let mut rng = SimRng::new(seed);
        let mut phases = [[0.0; 3]; 3];
        for axis in phases.iter_mut() {
            for p in axis.iter_mut() {
                *p = rng.uniform() * std::f64::consts::TAU;
            }
        }
        Self {
            phases,
            amplitude,
            frequency,
        }
    }

    fn offset(&self, t: f64) -> DVec3 {
        let axis = |ph: &[f64; 3]| -> f64 {
            (0..3)
                .map(|k| NOISE_WEIGHTS[k] * (std::f64::consts::TAU * self.frequency * NOISE_RATIOS[k] * t + ph[k]).sin())
                .sum::<f64>()
        };
        DVec3::new(axis(&self.phases[0]), axis(&self.phases[1]), axis(&self.phases[2])) * self.amplitude
    }
}

struct Segment {
    node: usize,
    scene_start: f64,
    scene_end: f64,
    scale: f64,
    wall_start: f64,
}

impl Segment {
    fn wall_length(&self) -> f64 {
        (self.scene_end - self.scene_start) / self.scale
    }
}

fn plan_scale(plan: &ShotPlan, config: &PlaybackConfig) -> f64 {
    if plan.technique(Category::Fx) == Technique::SlowMotion {
        config.slow_mo_factor
    } else {
        1.0
    }
}

/// Number of frames of a track of `wall_duration` seconds, endpoints included.
pub fn frame_count(wall_duration: f64, fps: f64) -> usize {
    (wall_duration * fps + 1e-9).floor() as usize + 1
}

/// Minimal axis-aligned translation that frees a sphere of `radius`.
///
/// Moving along one axis preserves the other two coordinates, so the
/// residual motion of a tracking camera slides along the contact face.
pub fn push_out(grid: &OccupancyGrid, position: DVec3, radius: f64) -> Result<DVec3, Trapped> {
    let cell = grid.cell_size;
    if grid.overlapping_cells(position, radius).is_empty() {
        return Ok(position);
    }
    let limit = MAX_PUSH_CELLS * cell;
    let mut best: Option<(f64, DVec3)> = None;
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut q = position;
            let cleared = loop {
                let cells = grid.overlapping_cells(q, radius);
                if cells.is_empty() {
                    break true;
                }
                let mut shift: f64 = 0.0;
                for c in cells {
                    let b = grid.cell_box(c);
                    let mut perp2 = 0.0;
                    for other in (0..3).filter(|&o| o != axis) {
                        let d = (b.min[other] - q[other]).max(q[other] - b.max[other]).max(0.0);
                        perp2 += d * d;
                    }
                    let reach = (radius * radius - perp2).max(0.0).sqrt();
                    let need = if sign > 0.0 {
                        b.max[axis] + reach - q[axis]
                    } else {
                        q[axis] - (b.min[axis] - reach)
                    };
                    shift = shift.max(need);
                }
                q[axis] += sign * (shift + 1e-9);
                if (q[axis] - position[axis]).abs() > limit {
                    break false;
                }
            };
            if cleared {
                let d = (q[axis] - position[axis]).abs();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, q));
                }
            }
        }
    }
    best.map(|(_, q)| q).ok_or(Trapped)
}

/// Whether a sphere swept from `a` to `b` keeps clear of occupied cells, by
/// sampling every quarter cell. Contact at exactly `radius` counts as clear.
fn path_clear(grid: &OccupancyGrid, a: DVec3, b: DVec3, radius: f64) -> bool {
    let r = radius * (1.0 - 1e-6);
    let n = ((b - a).length() / (grid.cell_size * 0.25)).ceil().max(1.0) as usize;
    (0..=n).all(|i| !grid.sphere_overlaps(a.lerp(b, i as f64 / n as f64), r))
}

/// Moves a camera sphere from `from` toward `to` without passing through
/// occupied cells.
///
/// The pushed-out `to` is used when the straight path to it stays clear.
/// Otherwise the camera advances in quarter-cell steps, each resolved by
/// push-out, so it slides along the first surface it meets and stops where
/// it would be trapped. A `from` that already penetrates falls back to plain
/// push-out.
pub fn move_camera(grid: &OccupancyGrid, from: DVec3, to: DVec3, radius: f64) -> DVec3 {
    let target = push_out(grid, to, radius);
    if grid.sphere_overlaps(from, radius * (1.0 - 1e-6)) {
        return target.unwrap_or(from);
    }
    if let Ok(c) = target {
        if path_clear(grid, from, c, radius) {
            return c;
        }
    }
    let n = ((to - from).length() / (grid.cell_size * 0.25)).ceil().max(1.0) as usize;
    let delta = (to - from) / n as f64;
    let mut cur = from;
    for _ in 0..n {
        match push_out(grid, cur + delta, radius) {
            Ok(next) if path_clear(grid, cur, next, radius) => cur = next,
            _ => break,
        }
    }
    cur
}

/// Pushes the frame's camera sphere out of occupied cells and re-aims it at
/// `aim`.
pub fn resolve_collision(frame: &CameraFrame, grid: &OccupancyGrid, aim: DVec3) -> Result<CameraFrame, Trapped> {
    let position = push_out(grid, frame.position, CAMERA_RADIUS)?;
    Ok(oriented(CameraFrame { position, ..*frame }, aim))
}

fn oriented(mut frame: CameraFrame, aim: DVec3) -> CameraFrame {
    let to = aim - frame.position;
    if to.length_squared() > 1e-18 {
        let (_, up, forward) = camera_basis(to);
        frame.direction = forward;
        frame.up = up;
    }
    frame
}

fn lerp_position(frames: &[CameraFrame], t: f64) -> DVec3 {
    match frames.iter().position(|f| f.scene_time >= t) {
        None => frames.last().map(|f| f.position).unwrap_or(DVec3::ZERO),
        Some(0) => frames[0].position,
        Some(i) => {
            let (a, b) = (&frames[i - 1], &frames[i]);
            let span = b.scene_time - a.scene_time;
            let s = if span > 0.0 { (t - a.scene_time) / span } else { 1.0 };
            a.position.lerp(b.position, s)
        }
    }
}

/// Brings a moving camera to rest `lead` seconds before each target stop.
///
/// From `stop − lead` until the targets resume the camera holds the position
/// it had at `stop − lead`; it eases into and out of the hold over `lead`
/// seconds so the speed reaches zero continuously. `resumes` are the scene
/// times the targets start moving again.
pub fn apply_leading(frames: &mut [CameraFrame], stops: &[f64], resumes: &[f64], lead: f64) {
    let Some(first) = frames.first().map(|f| f.scene_time) else {
        return;
    };
    let last = frames.last().map(|f| f.scene_time).unwrap_or(first);
    let mut protected_until = f64::NEG_INFINITY;
    let mut stops: Vec<f64> = stops.iter().copied().filter(|s| *s > first && *s <= last + 1e-9).collect();
    stops.sort_by(f64::total_cmp);
    for s in stops {
        let rest = (s - lead).max(first);
        let ease_start = (rest - lead).max(protected_until).max(first);
        let release = resumes.iter().copied().filter(|m| *m >= s).fold(f64::INFINITY, f64::min);
        let hold = lerp_position(frames, rest);
        for f in frames.iter_mut() {
            let t = f.scene_time;
            let w = if t >= rest && t < release {
                1.0
            } else if t < rest && t >= ease_start && rest > ease_start {
                smoothstep((t - ease_start) / (rest - ease_start))
            } else if t >= release && lead > 0.0 {
                1.0 - smoothstep((t - release) / lead)
            } else {
                0.0
            };
            if w > 0.0 {
                f.position = f.position.lerp(hold, w);
            }
        }
        protected_until = s;
    }
}

fn setting(plan: &ShotPlan, key: &str) -> Option<f64> {
    plan.technique_settings.get(key).copied()
}

/// Runs every storyboard node from its marker time to the next marker (the
/// last node runs to the end of the timeline).
pub fn execute<G: Borrow<OccupancyGrid>>(
    storyboard: &Storyboard,
    scene: &SceneDescription,
    timeline: &Timeline,
    grids: &[G],
    config: &PlaybackConfig,
) -> Result<CameraTrack, PlaybackError> {
    config.validate()?;
    if storyboard.nodes.is_empty() {
        return Err(PlaybackError::EmptyStoryboard);
    }
    let plans: Vec<&ShotPlan> = storyboard.nodes.iter().map(|n| &n.plan).collect();
    let grid_for: Vec<&OccupancyGrid> = plans
        .iter()
        .map(|p| {
            grids
                .iter()
                .map(|g| g.borrow())
                .find(|g| g.marker_id == p.marker_id)
                .ok_or_else(|| PlaybackError::MissingGrid(p.marker_id.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut segments = Vec::with_capacity(plans.len());
    let mut wall = 0.0;
    for (i, plan) in plans.iter().enumerate() {
        let scene_end = plans.get(i + 1).map(|n| n.time).unwrap_or(timeline.duration).max(plan.time);
        let seg = Segment {
            node: i,
            scene_start: plan.time,
            scene_end,
            scale: plan_scale(plan, config),
            wall_start: wall,
        };
        wall += seg.wall_length();
        segments.push(seg);
    }
    let total = wall;
    let n = frame_count(total, config.fps);
    let last_nonempty = segments.iter().rposition(|s| s.scene_end > s.scene_start).unwrap_or(segments.len() - 1);

    // Frame indices per segment; a frame on a boundary opens the later segment.
    let mut per_segment: Vec<Vec<(usize, f64)>> = vec![Vec::new(); segments.len()];
    for k in 0..n {
        let w = k as f64 / config.fps;
        let idx = segments
            .iter()
            .position(|s| w >= s.wall_start && w < s.wall_start + s.wall_length())
            .unwrap_or(last_nonempty);
        per_segment[idx].push((k, w));
    }

    let mut frames = Vec::with_capacity(n);
    let mut segment_of_frame = Vec::with_capacity(n);
    let mut cut_times = Vec::new();
    for (seg, slots) in segments.iter().zip(&per_segment) {
        if slots.is_empty() {
            continue;
        }
        cut_times.push(quantize(seg.wall_start));
        let plan = plans[seg.node];
        let grid = grid_for[seg.node];
        let out = run_segment(seg, plan, grid, scene, slots, config)?;
        segment_of_frame.extend(std::iter::repeat_n(seg.node, out.len()));
        frames.extend(out);
    }
    Ok(CameraTrack {
        fps: config.fps,
        cut_times,
        segment_of_frame,
        frames,
    })
}

fn run_segment(
    seg: &Segment,
    plan: &ShotPlan,
    grid: &OccupancyGrid,
    scene: &SceneDescription,
    slots: &[(usize, f64)],
    config: &PlaybackConfig,
) -> Result<Vec<CameraFrame>, PlaybackError> {
    let look = plan.technique(Category::Look);
    let tracking = plan.technique(Category::Tracking);
    let p0 = plan.pose.position;
    let fov0 = plan.pose.fov;
    let subject0 = scene.subject_point(&plan.targets, seg.scene_start)?;
    let aim_offset = plan.pose.look_at - plan.focus_point;
    let offset = p0 - subject0;
    let dir0 = plan.pose.direction();
    let wall_len = seg.wall_length();

    let mut follow = Follow {
        position: p0,
        velocity: DVec3::ZERO,
        omega: 2.0 / config.steadycam_smoothing_time,
    };
    let noise = HandheldNoise::new(
        derive_seed(config.noise_seed, seg.node as u64),
        config.handheld_amplitude,
        config.handheld_frequency,
    );
    let travel = setting(plan, "travel").unwrap_or(config.dolly_zoom_travel);

    let mut frames = Vec::with_capacity(slots.len());
    let mut aims = Vec::with_capacity(slots.len());
    let mut prev_wall: Option<f64> = None;
    for &(_, w) in slots {
        let tau = w - seg.wall_start;
        let t = seg.scene_start + tau * seg.scale;
        let subject = scene.subject_point(&plan.targets, t)?;
        let position = match tracking {
            Technique::SteadycamTracking | Technique::HandheldTracking => {
                if let Some(pw) = prev_wall {
                    follow.step(subject + offset, w - pw);
                }
                let mut p = follow.position;
                if tracking == Technique::HandheldTracking {
                    p += noise.offset(tau) - noise.offset(0.0);
                }
                p
            }
            _ if look == Technique::DollyZoom => {
                let progress = if wall_len > 0.0 { (tau / wall_len).min(1.0) } else { 0.0 };
                p0 - dir0 * (travel * progress)
            }
            _ => p0,
        };
        prev_wall = Some(w);
        let fov = match look {
            Technique::CloseUpZoom => {
                let z = setting(plan, "zoom_factor").unwrap_or(DEFAULT_CLOSE_UP_ZOOM);
                let progress = if wall_len > 0.0 { (tau / wall_len).min(1.0) } else { 0.0 };
                fov0 * (1.0 - (1.0 - z) * progress)
            }
            Technique::QuickZoom => {
                let z = setting(plan, "zoom_factor").unwrap_or(DEFAULT_QUICK_ZOOM);
                let d = setting(plan, "duration").unwrap_or(config.quick_zoom_duration);
                fov0 * (1.0 - (1.0 - z) * (tau / d).min(1.0))
            }
            _ => fov0,
        };
        frames.push(CameraFrame {
            wall_time: w,
            scene_time: t,
            position,
            direction: dir0,
            up: DVec3::Y,
            fov,
            time_scale: seg.scale,
        });
        aims.push((subject, subject + aim_offset));
    }

    if tracking.moves_camera() {
        let mut stops = Vec::new();
        let mut resumes = Vec::new();
        for id in &plan.targets {
            if let Some(obj) = scene.object(id) {
                stops.extend(stop_times(&obj.track));
                resumes.extend(motion_start_times(&obj.track));
            }
        }
        apply_leading(&mut frames, &stops, &resumes, config.lead_time);
    }

    let dolly_k = (subject0 - p0).length() * (fov0 * 0.5).tan();
    let mut last_valid: Option<DVec3> = None;
    for (f, &(subject, aim)) in frames.iter_mut().zip(&aims) {
        let position = match last_valid {
            Some(from) => move_camera(grid, from, f.position, CAMERA_RADIUS),
            None => push_out(grid, f.position, CAMERA_RADIUS).unwrap_or(f.position),
        };
        last_valid = Some(position);
        f.position = position;
        if look == Technique::DollyZoom {
            let d = (subject - position).length().max(1e-9);
            f.fov = 2.0 * (dolly_k / d).atan();
        }
        *f = quantized(oriented(*f, aim));
    }
    Ok(frames)
}

fn quantized(f: CameraFrame) -> CameraFrame {
    CameraFrame {
        wall_time: quantize(f.wall_time),
        scene_time: quantize(f.scene_time),
        position: quantize_vec(f.position),
        direction: quantize_vec(f.direction),
        up: quantize_vec(f.up),
        fov: quantize(f.fov),
        time_scale: quantize(f.time_scale),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackFormat {
    Csv,
    Json,
}

impl FromStr for TrackFormat {
    type Err = PlaybackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(PlaybackError::Parse(format!("unknown track format `{other}`"))),
        }
    }
}

pub const CSV_HEADER: &str = "wall_time,scene_time,px,py,pz,dir_x,dir_y,dir_z,fov,time_scale";

pub fn export_track(track: &CameraTrack, format: TrackFormat) -> Vec<u8> {
    match format {
        TrackFormat::Csv => {
            let mut out = String::with_capacity(64 * (track.frames.len() + 1));
            out.push_str(CSV_HEADER);
            out.push('\n');
            for f in &track.frames {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    f.wall_time,
                    f.scene_time,
                    f.position.x,
                    f.position.y,
                    f.position.z,
                    f.direction.x,
                    f.direction.y,
                    f.direction.z,
                    f.fov,
                    f.time_scale
                );
            }
            out.into_bytes()
        }
        TrackFormat::Json => {
            let mut out = serde_json::to_vec_pretty(track).expect("track serializes");
            out.push(b'\n');
            out
        }
    }
}

pub fn load_track_json(bytes: &[u8]) -> Result<CameraTrack, PlaybackError> {
    serde_json::from_slice(bytes).map_err(|e| PlaybackError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    use crate::config::RuleParams;
    use crate::placement::{CameraPose, DEFAULT_ASPECT, DEFAULT_FOV};
    use crate::scene::{Keyframe, KeyframeTrack, SceneObject, Shape};
    use crate::storyboard::{preview_ref, SimulationConfig, StoryboardNode, STORYBOARD_VERSION};

    fn walker() -> SceneObject {
        let key = |time: f64, x: f64| Keyframe {
            time,
            position: DVec3::new(x, 0.9, 0.0),
            rotation: DVec3::new(std::f64::consts::FRAC_PI_2, 0.0, 0.0),
        };
        SceneObject {
            id: "hero".into(),
            shape: Shape::Capsule {
                radius: 0.25,
                half_height: 0.65,
            },
            track: KeyframeTrack::new(vec![key(0.0, 0.0), key(3.0, 3.0), key(4.0, 3.0), key(5.5, 4.5), key(8.0, 4.5)]),
            is_character: true,
            is_static: false,
            subject_offset: DVec3::new(0.0, 0.7, 0.0),
        }
    }

    fn scene() -> SceneDescription {
        SceneDescription { objects: vec![walker()] }
    }

    fn timeline(duration: f64) -> Timeline {
        Timeline {
            duration,
            markers: vec![],
            proxies: vec![],
        }
    }

    fn plan(id: &str, time: f64, position: DVec3, techniques: &[Technique]) -> ShotPlan {
        let subject = scene().subject_point(&["hero".to_string()], time).unwrap();
        ShotPlan {
            marker_id: id.into(),
            time,
            targets: vec!["hero".into()],
            dramatisation: 0.5,
            pace: 0.5,
            techniques: techniques.iter().map(|t| (t.category(), *t)).collect(),
            pose: CameraPose::new(position, subject, DEFAULT_FOV, DEFAULT_ASPECT),
            focus_point: subject,
            technique_settings: BTreeMap::new(),
            attempts: 1,
            degraded: false,
            used_default: BTreeSet::new(),
            rng_draws: 0,
        }
    }

    fn storyboard(plans: Vec<ShotPlan>) -> Storyboard {
        Storyboard {
            version: STORYBOARD_VERSION,
            config: SimulationConfig {
                seed: 0,
                params: RuleParams::default(),
                techniques: Default::default(),
                dataset_path: String::new(),
                scene_path: String::new(),
            },
            nodes: plans
                .into_iter()
                .map(|plan| StoryboardNode {
                    preview_ref: preview_ref(&plan.marker_id),
                    plan,
                    locked: false,
                    simulation_seed: 0,
                })
                .collect(),
            stale_markers: vec![],
        }
    }

    fn open_grid(ids: &[&str]) -> Vec<OccupancyGrid> {
        ids.iter()
            .map(|id| OccupancyGrid::with_dims(DVec3::new(-10.0, -1.0, -10.0), 0.25, [80, 40, 80], *id))
            .collect()
    }

    fn speed(a: &CameraFrame, b: &CameraFrame) -> f64 {
        (b.position - a.position).length() / (b.wall_time - a.wall_time)
    }

    #[test]
    fn stationary_holds_position_and_tracks_subject() {
        let sb = storyboard(vec![plan("m", 0.0, DVec3::new(1.0, 1.6, -4.0), &[])]);
        let track = execute(&sb, &scene(), &timeline(3.0), &open_grid(&["m"]), &PlaybackConfig::default()).unwrap();
        assert_eq!(track.frames.len(), 91);
        let s = scene();
        for f in &track.frames {
            assert_eq!(f.position, track.frames[0].position);
            let subject = s.subject_point(&["hero".to_string()], f.scene_time).unwrap();
            let want = (subject - f.position).normalize();
            assert!(f.direction.dot(want) > 1.0 - 1e-8);
        }
    }

    #[test]
    fn frame_count_includes_endpoints() {
        let sb = storyboard(vec![plan("m", 0.0, DVec3::new(1.0, 1.6, -4.0), &[])]);
        let track = execute(&sb, &scene(), &timeline(2.0), &open_grid(&["m"]), &PlaybackConfig::default()).unwrap();
        assert_eq!(track.frames.len(), 61);
        let csv = String::from_utf8(export_track(&track, TrackFormat::Csv)).unwrap();
        assert_eq!(csv.lines().count(), 62);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn empty_track_exports_header_only() {
        let track = CameraTrack {
            fps: 30.0,
            cut_times: vec![],
            segment_of_frame: vec![],
            frames: vec![],
        };
        assert_eq!(export_track(&track, TrackFormat::Csv), format!("{CSV_HEADER}\n").into_bytes());
    }

    #[test]
    fn json_round_trip_and_csv_is_lossless() {
        let sb = storyboard(vec![plan("m", 0.0, DVec3::new(1.0, 1.6, -4.0), &[Technique::HandheldTracking])]);
        let track = execute(&sb, &scene(), &timeline(2.0), &open_grid(&["m"]), &PlaybackConfig::default()).unwrap();
        let back = load_track_json(&export_track(&track, TrackFormat::Json)).unwrap();
        assert_eq!(back, track);
        let csv = String::from_utf8(export_track(&track, TrackFormat::Csv)).unwrap();
        for (line, f) in csv.lines().skip(1).zip(&track.frames) {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(v[2], f.position.x);
            assert_eq!(v[8], f.fov);
        }
    }

    #[test]
    fn dolly_zoom_holds_subject_size() {
        let sb = storyboard(vec![plan("m", 0.0, DVec3::new(0.0, 1.6, -3.0), &[Technique::DollyZoom])]);
        let s = scene();
        let track = execute(&sb, &s, &timeline(2.0), &open_grid(&["m"]), &PlaybackConfig::default()).unwrap();
        let k = |f: &CameraFrame| {
            let subject = s.subject_point(&["hero".to_string()], f.scene_time).unwrap();
            (subject - f.position).length() * (f.fov * 0.5).tan()
        };
        let k0 = k(&track.frames[0]);
        for f in &track.frames {
            assert!((k(f) - k0).abs() / k0 <= 0.01);
        }
        let last = track.frames.last().unwrap();
        assert!((last.position - track.frames[0].position).length() > 1.9);
        assert!(last.fov < track.frames[0].fov);
    }

    #[test]
    fn slow_motion_scales_scene_time() {
        let sb = storyboard(vec![
            plan("a", 0.0, DVec3::new(1.0, 1.6, -4.0), &[Technique::SlowMotion]),
            plan("b", 0.4, DVec3::new(1.0, 1.6, -4.0), &[]),
        ]);
        let track = execute(&sb, &scene(), &timeline(1.4), &open_grid(&["a", "b"]), &PlaybackConfig::default()).unwrap();
        // The slow segment spans 0.4 s of scene time over 1 s of wall time.
        assert_eq!(track.cut_times, vec![0.0, 1.0]);
        let at_one = track.frames.iter().find(|f| (f.wall_time - 1.0).abs() < 1e-9).unwrap();
        assert!((at_one.scene_time - 0.4).abs() < 1e-9);
        for w in track.frames.windows(2) {
            let slope = (w[1].scene_time - w[0].scene_time) / (w[1].wall_time - w[0].wall_time);
            let want = if w[1].wall_time <= 1.0 + 1e-9 { 0.4 } else { 1.0 };
            assert!((slope - want).abs() < 1e-6, "slope {slope}");
            assert_eq!(w[0].time_scale, if w[0].wall_time < 1.0 - 1e-9 { 0.4 } else { 1.0 });
        }
    }

    fn moving_frames(stops: &[f64]) -> Vec<CameraFrame> {
        (0..=150)
            .map(|k| {
                let t = k as f64 / 30.0;
                // Moves except exactly at rest after the last stop.
                let x = stops.iter().fold(t, |x, s| if t > *s { x.min(*s) } else { x });
                CameraFrame {
                    wall_time: t,
                    scene_time: t,
                    position: DVec3::new(x, 0.0, 0.0),
                    direction: DVec3::Z,
                    up: DVec3::Y,
                    fov: 1.0,
                    time_scale: 1.0,
                }
            })
            .collect()
    }

    #[test]
    fn leading_rests_before_stop() {
        let mut frames = moving_frames(&[3.0]);
        apply_leading(&mut frames, &[3.0], &[], 0.3);
        for w in frames.windows(2) {
            if w[0].scene_time >= 2.7 - 1e-9 {
                assert!(speed(&w[0], &w[1]) <= 1e-3);
            }
        }
        // Before the easing window the track is untouched.
        assert_eq!(frames[30].position.x, 1.0);
    }

    #[test]
    fn leading_without_stops_is_identity() {
        let original = moving_frames(&[]);
        let mut frames = original.clone();
        apply_leading(&mut frames, &[], &[], 0.3);
        assert_eq!(frames, original);
        apply_leading(&mut frames, &[9.0], &[], 0.3);
        assert_eq!(frames, original);
    }

    #[test]
    fn leading_handles_two_stops() {
        // Moves on [0,1.5], rests, moves on [2.5,4], rests.
        let mut frames: Vec<CameraFrame> = moving_frames(&[]);
        for f in frames.iter_mut() {
            let t = f.scene_time;
            let x = t.min(1.5) + (t.clamp(2.5, 4.0) - 2.5);
            f.position = DVec3::new(x, 0.0, 0.0);
        }
        apply_leading(&mut frames, &[1.5, 4.0], &[2.5], 0.3);
        for s in [1.5, 4.0] {
            for w in frames.windows(2) {
                if w[0].scene_time >= s - 0.3 - 1e-9 && w[1].scene_time <= s + 1e-9 {
                    assert!(speed(&w[0], &w[1]) <= 1e-3, "stop {s} at {}", w[0].scene_time);
                }
            }
        }
        for w in frames.windows(2) {
            assert!((w[1].position - w[0].position).length() < 0.5);
        }
    }

    #[test]
    fn steadycam_comes_to_rest_before_target_stops() {
        let sb = storyboard(vec![plan("m", 0.0, DVec3::new(0.0, 1.6, -3.0), &[Technique::SteadycamTracking])]);
        let track = execute(&sb, &scene(), &timeline(8.0), &open_grid(&["m"]), &PlaybackConfig::default()).unwrap();
        for s in [3.0, 5.5] {
            for w in track.frames.windows(2) {
                if w[0].scene_time >= s - 0.3 - 1e-9 && w[1].scene_time <= s + 1e-9 {
                    assert!(speed(&w[0], &w[1]) <= 1e-3);
                }
            }
        }
        // The camera does follow in between.
        assert!(track.frames.last().unwrap().position.x > 3.5);
    }

    fn wall_grid() -> OccupancyGrid {
        // Occupied half-space x < 0 inside a 4 m cube.
        let mut g = OccupancyGrid::with_dims(DVec3::splat(-2.0), 0.25, [16, 16, 16], "m");
        for k in 0..16 {
            for j in 0..16 {
                for i in 0..8 {
                    g.set_occupied([i, j, k]);
                }
            }
        }
        g
    }

    fn brute_push(grid: &OccupancyGrid, p: DVec3) -> f64 {
        let mut best = f64::INFINITY;
        for axis in [DVec3::X, DVec3::NEG_X, DVec3::Y, DVec3::NEG_Y, DVec3::Z, DVec3::NEG_Z] {
            let mut d = 0.0;
            while d < 2.0 {
                if !grid.sphere_overlaps(p + axis * d, CAMERA_RADIUS) {
                    best = best.min(d);
                    break;
                }
                d += 1e-4;
            }
        }
        best
    }

    #[test]
    fn free_position_is_unchanged() {
        let g = wall_grid();
        let p = DVec3::new(1.0, 0.1, 0.3);
        assert_eq!(push_out(&g, p, CAMERA_RADIUS), Ok(p));
    }

    #[test]
    fn penetration_pushes_along_face_normal() {
        let g = wall_grid();
        let p = DVec3::new(-0.1, 0.1, 0.3);
        let q = push_out(&g, p, CAMERA_RADIUS).unwrap();
        assert!((q.x - 0.2).abs() < 1e-6);
        assert_eq!((q.y, q.z), (p.y, p.z));
        let moved = (q - p).length();
        assert!((moved - 0.3).abs() < 1e-6);
        assert!((moved - brute_push(&g, p)).abs() < 2e-4);
    }

    #[test]
    fn push_out_matches_brute_force_near_corners() {
        let mut g = OccupancyGrid::with_dims(DVec3::splat(-2.0), 0.25, [16, 16, 16], "m");
        for k in 6..10 {
            for j in 0..9 {
                for i in 5..11 {
                    g.set_occupied([i, j, k]);
                }
            }
        }
        let mut rng = SimRng::new(3);
        for _ in 0..60 {
            let p = DVec3::new(rng.range(-1.0, 1.0), rng.range(-1.0, 0.5), rng.range(-0.8, 0.8));
            let q = push_out(&g, p, CAMERA_RADIUS).unwrap();
            assert!(!g.sphere_overlaps(q, CAMERA_RADIUS));
            assert!(((q - p).length() - brute_push(&g, p)).abs() < 2e-4, "at {p}");
        }
    }

    #[test]
    fn trapped_holds_previous_position() {
        let mut g = OccupancyGrid::with_dims(DVec3::splat(-4.0), 0.25, [32, 32, 32], "m");
        for k in 0..32 {
            for j in 0..32 {
                for i in 0..32 {
                    g.set_occupied([i, j, k]);
                }
            }
        }
        assert_eq!(push_out(&g, DVec3::ZERO, CAMERA_RADIUS), Err(Trapped));
        let f = CameraFrame {
            wall_time: 0.0,
            scene_time: 0.0,
            position: DVec3::ZERO,
            direction: DVec3::Z,
            up: DVec3::Y,
            fov: 1.0,
            time_scale: 1.0,
        };
        assert_eq!(resolve_collision(&f, &g, DVec3::Z), Err(Trapped));
    }

    #[test]
    fn sliding_along_wall_never_enters_cells() {
        // The hero walks parallel to a wall at z = 0.5 and the follow offset clips it.
        let mut grid = OccupancyGrid::with_dims(DVec3::new(-10.0, -1.0, -10.0), 0.25, [80, 40, 80], "m");
        for k in 42..80 {
            for j in 0..40 {
                for i in 0..80 {
                    grid.set_occupied([i, j, k]);
                }
            }
        }
        let mut p = plan("m", 0.0, DVec3::new(-2.0, 1.6, 0.3), &[Technique::SteadycamTracking]);
        p.pose.position = DVec3::new(-2.0, 1.6, 0.45);
        let sb = storyboard(vec![p]);
        let track = execute(&sb, &scene(), &timeline(8.0), &[grid.clone()], &PlaybackConfig::default()).unwrap();
        for f in &track.frames {
            assert!(!crate::proxy::is_occupied(&grid, f.position));
            assert!(!grid.sphere_overlaps(f.position, CAMERA_RADIUS - 1e-6));
        }
        for w in track.frames.windows(2) {
            assert!((w[1].position - w[0].position).length() <= 0.5);
        }
    }

    #[test]
    fn camera_never_tunnels_through_a_thin_wall() {
        // Slab one cell thick at z in [0, 0.25); the camera starts in front of it.
        let mut grid = OccupancyGrid::with_dims(DVec3::splat(-2.0), 0.25, [16, 16, 16], "m");
        for j in 0..16 {
            for i in 0..16 {
                grid.set_occupied([i, j, 8]);
            }
        }
        let start = DVec3::new(0.1, 0.5, -0.5);
        let mut p = start;
        for step in 1..=40 {
            p = move_camera(&grid, p, start + DVec3::new(0.01, 0.0, 0.05) * step as f64, CAMERA_RADIUS);
            assert!(p.z <= -CAMERA_RADIUS + 1e-6, "crossed the wall at step {step}: {p}");
            assert!(!grid.sphere_overlaps(p, CAMERA_RADIUS - 1e-6));
        }
        // Tangential motion survives the contact.
        assert!((p.x - 0.5).abs() < 1e-9);
        // Open space: the target is reached exactly.
        let free = DVec3::new(0.0, 0.5, -1.5);
        assert_eq!(move_camera(&grid, DVec3::new(0.0, 0.5, -1.0), free, CAMERA_RADIUS), free);
    }

    #[test]
    fn exports_are_deterministic_and_seeded() {
        let sb = storyboard(vec![
            plan("a", 0.0, DVec3::new(0.0, 1.6, -3.0), &[Technique::HandheldTracking]),
            plan("b", 4.0, DVec3::new(5.0, 1.6, 3.0), &[Technique::QuickZoom, Technique::SlowMotion]),
        ]);
        let grids = open_grid(&["a", "b"]);
        let run = |seed| {
            let cfg = PlaybackConfig {
                noise_seed: seed,
                ..Default::default()
            };
            export_track(&execute(&sb, &scene(), &timeline(8.0), &grids, &cfg).unwrap(), TrackFormat::Csv)
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = PlaybackConfig {
            fps: 0.0,
            ..Default::default()
        };
        let sb = storyboard(vec![plan("m", 0.0, DVec3::new(1.0, 1.6, -4.0), &[])]);
        assert!(matches!(execute(&sb, &scene(), &timeline(2.0), &open_grid(&["m"]), &cfg), Err(PlaybackError::Config(_))));
        let empty = storyboard(vec![]);
        assert!(matches!(
            execute(&empty, &scene(), &timeline(2.0), &open_grid(&["m"]), &PlaybackConfig::default()),
            Err(PlaybackError::EmptyStoryboard)
        ));
        assert!(matches!(
            execute(&sb, &scene(), &timeline(2.0), &open_grid(&["x"]), &PlaybackConfig::default()),
            Err(PlaybackError::MissingGrid(_))
        ));
    }
}
