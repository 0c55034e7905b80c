//! Camera placement for the selected Positioning technique.
//!
//! Poses are sampled inside a technique's distance/azimuth/elevation band,
//! aimed so the subject lands on a rule-of-thirds intersection, and validated
//! against the marker's occupancy grid. [`place_camera`] drives the retry loop
//! and falls back to re-selection and finally to a flagged degraded plan.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{RuleParams, TechniqueOverrides};
use crate::dataset::{AggregateStats, Category, CategoryModel, Technique};
use crate::geometry::PosedShape;
use crate::math::{camera_basis, direction_from_yaw_pitch, halton, project_ndc, quantize, quantize_vec, yaw_pitch, WORLD_UP};
use crate::proxy::{capsule_cast, capsule_hit, is_occupied, OccupancyGrid};
use crate::rng::SimRng;
use crate::scene::{SceneDescription, SceneError, ShotMarker};
use crate::selection::{select_for_marker, SelectionContext};

/// Camera body radius for collision and visibility casts.
pub const CAMERA_RADIUS: f64 = 0.2;
pub const DEFAULT_FOV: f64 = PI / 3.0;
pub const DEFAULT_ASPECT: f64 = 16.0 / 9.0;
pub const MIN_FOV: f64 = 0.175;
pub const MAX_FOV: f64 = 2.59;
/// Low-discrepancy probes per band for feasibility tests.
pub const PROBE_COUNT: u32 = 32;
/// Half-angle of the cone in front of a single character target.
pub const FACING_CONE: f64 = PI / 3.0;
/// Chest-to-crown span a close-up frames, and the share of frame height it fills.
pub const CLOSE_UP_SPAN: f64 = 0.8;
pub const CLOSE_UP_FILL: f64 = 0.8;
pub const CLOSE_UP_MAX_DISTANCE: f64 = 1.0;
pub const GODS_EYE_TILT: f64 = 10.0 * PI / 180.0;
pub const MASTER_MARGIN: f64 = 1.1;
pub const DEFAULT_DOLLY_TRAVEL: f64 = 2.0;
pub const DEFAULT_CLOSE_UP_ZOOM: f64 = 0.6;
pub const DEFAULT_QUICK_ZOOM: f64 = 0.5;
pub const DEFAULT_QUICK_ZOOM_DURATION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("technique `{0}` is not a positioning technique")]
    NoBand(Technique),
    #[error("technique `{0}` has an empty distance band under the current limits")]
    EmptyBand(Technique),
    #[error("subject is behind the camera")]
    BehindCamera,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    pub position: DVec3,
    /// Point the camera is oriented at; up is world up.
    pub look_at: DVec3,
    /// Vertical field of view, radians.
    pub fov: f64,
    pub aspect: f64,
}

impl CameraPose {
    pub fn new(position: DVec3, look_at: DVec3, fov: f64, aspect: f64) -> Self {
        Self {
            position: quantize_vec(position),
            look_at: quantize_vec(look_at),
            fov: quantize(fov.clamp(MIN_FOV, MAX_FOV)),
            aspect: quantize(aspect),
        }
    }

    pub fn direction(&self) -> DVec3 {
        (self.look_at - self.position).normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validation {
    Valid,
    Collision,
    Occluded,
    ThirdsFail,
}

/// Closed distance interval from the subject, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub min: f64,
    pub max: f64,
}

impl Band {
    pub fn mid(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.min - 1e-9 && d <= self.max + 1e-9
    }
}

fn base_band(t: Technique) -> Option<(f64, f64)> {
    Some(match t {
        Technique::CloseUp => (0.3, CLOSE_UP_MAX_DISTANCE),
        Technique::Medium => (1.0, 3.0),
        Technique::Free => (1.0, 8.0),
        Technique::Long => (15.0, 40.0),
        Technique::Pan => (1.5, 6.0),
        Technique::GodsEye => (2.0, 10.0),
        Technique::Master => (0.0, 0.0),
        _ => return None,
    })
}

fn elevation_range(t: Technique) -> (f64, f64) {
    let deg = PI / 180.0;
    match t {
        Technique::CloseUp | Technique::Medium => (-10.0 * deg, if t == Technique::CloseUp { 15.0 } else { 25.0 } * deg),
        Technique::Free => (-15.0 * deg, 45.0 * deg),
        Technique::Long => (5.0 * deg, 30.0 * deg),
        Technique::Master => (10.0 * deg, 35.0 * deg),
        Technique::Pan => (-5.0 * deg, 10.0 * deg),
        _ => (0.0, 0.0),
    }
}

fn probe_u(i: u32) -> [f64; 3] {
    [halton(i + 1, 2), halton(i + 1, 3), halton(i + 1, 5)]
}

/// Per-technique geometry cached for one marker.
#[derive(Debug, Clone)]
pub struct TechniqueGeometry {
    pub band: Option<Band>,
    /// Some probe is non-colliding with a clear capsule to the subject.
    pub feasible: bool,
    /// Some feasible probe also has room to dolly backward.
    pub dolly_room: bool,
    /// Band-center points used for transition distances.
    pub centers: Vec<DVec3>,
}

/// Everything placement and selection need to know about one marker.
#[derive(Debug, Clone)]
pub struct MarkerEnv {
    pub marker: ShotMarker,
    pub subject: DVec3,
    pub grid: Arc<OccupancyGrid>,
    /// Horizontal facing of a single character target.
    pub facing: Option<DVec3>,
    /// Target shapes at the marker time; they are not in the grid, and the
    /// camera only has to stay outside them.
    pub targets: Vec<PosedShape>,
    pub params: RuleParams,
    pub overrides: TechniqueOverrides,
    master_min: f64,
    geometry: BTreeMap<Technique, TechniqueGeometry>,
}

impl MarkerEnv {
    pub fn new(
        scene: &SceneDescription,
        marker: &ShotMarker,
        grid: Arc<OccupancyGrid>,
        params: &RuleParams,
        overrides: &TechniqueOverrides,
    ) -> Result<Self, SceneError> {
        let subject = scene.subject_point(&marker.targets, marker.time)?;
        let mut target_objs = Vec::new();
        for id in &marker.targets {
            target_objs.push(scene.object(id).ok_or_else(|| SceneError::DanglingTarget {
                owner: marker.id.clone(),
                target: id.clone(),
            })?);
        }
        let facing = match target_objs.as_slice() {
            [obj] if obj.is_character => {
                let f = obj.transform_at(marker.time).facing();
                let h = DVec3::new(f.x, 0.0, f.z);
                (h.length_squared() > 1e-12).then(|| h.normalize())
            }
            _ => None,
        };
        let targets = target_objs.iter().map(|o| o.posed_shape(marker.time)).collect();

        // Bounding sphere of every character and every target.
        let framed: Vec<_> = scene
            .objects
            .iter()
            .filter(|o| o.is_character || marker.targets.contains(&o.id))
            .map(|o| o.posed_shape(marker.time).bounds())
            .collect();
        let c = framed.iter().map(|b| b.center()).sum::<DVec3>() / framed.len().max(1) as f64;
        let r = framed
            .iter()
            .map(|b| (b.center() - c).length() + b.half_extents().length())
            .fold(0.0, f64::max);
        let fov = overrides
            .get(&Technique::Master)
            .and_then(|o| o.fov)
            .unwrap_or(DEFAULT_FOV);
        let master_min = MASTER_MARGIN * (r + (c - subject).length()) / (0.5 * fov).sin();

        let mut env = Self {
            marker: marker.clone(),
            subject,
            grid,
            facing,
            targets,
            params: params.clone(),
            overrides: overrides.clone(),
            master_min,
            geometry: BTreeMap::new(),
        };
        for t in Category::Positioning.members() {
            let g = env.compute_geometry(*t);
            env.geometry.insert(*t, g);
        }
        Ok(env)
    }

    /// Distance band after overrides and global shot-distance limits.
    pub fn band(&self, t: Technique) -> Result<Band, PlacementError> {
        let (mut lo, mut hi) = base_band(t).ok_or(PlacementError::NoBand(t))?;
        if t == Technique::Master {
            lo = self.master_min;
            hi = 1.25 * self.master_min;
        }
        if let Some(o) = self.overrides.get(&t) {
            lo = o.min_distance.unwrap_or(lo);
            hi = o.max_distance.unwrap_or(hi);
        }
        lo = lo.max(self.params.min_shot_distance);
        hi = hi.min(self.params.max_shot_distance);
        if t == Technique::CloseUp {
            hi = hi.min(CLOSE_UP_MAX_DISTANCE);
        }
        if lo > hi {
            return Err(PlacementError::EmptyBand(t));
        }
        Ok(Band { min: lo, max: hi })
    }

    pub fn geometry(&self, t: Technique) -> Option<&TechniqueGeometry> {
        self.geometry.get(&t)
    }

    fn compute_geometry(&self, t: Technique) -> TechniqueGeometry {
        let Ok(band) = self.band(t) else {
            return TechniqueGeometry {
                band: None,
                feasible: false,
                dolly_room: false,
                centers: Vec::new(),
            };
        };
        let travel = self.dolly_travel();
        let mut feasible = false;
        let mut dolly_room = false;
        let mut centers = Vec::with_capacity(PROBE_COUNT as usize);
        for i in 0..PROBE_COUNT {
            let u = probe_u(i);
            centers.push(self.band_position(t, band, [0.5, u[1], u[2]]));
            let p = self.band_position(t, band, u);
            if self.body_collides(p) || !capsule_cast(&self.grid, p, self.subject, CAMERA_RADIUS) {
                continue;
            }
            feasible = true;
            if self.dolly_clear(p, travel) {
                dolly_room = true;
            }
        }
        TechniqueGeometry {
            band: Some(band),
            feasible,
            dolly_room,
            centers,
        }
    }

    pub fn dolly_travel(&self) -> f64 {
        self.overrides
            .get(&Technique::DollyZoom)
            .and_then(|o| o.travel)
            .unwrap_or(DEFAULT_DOLLY_TRAVEL)
    }

    /// Maps a unit-cube sample to a camera position in the band.
    pub fn band_position(&self, t: Technique, band: Band, u: [f64; 3]) -> DVec3 {
        let d = band.min + u[0] * (band.max - band.min);
        let base_yaw = self.facing.map(|f| yaw_pitch(f).0);
        let dir = match t {
            Technique::GodsEye => {
                let tilt = u[1] * GODS_EYE_TILT;
                let az = u[2] * TAU;
                DVec3::new(tilt.sin() * az.cos(), tilt.cos(), tilt.sin() * az.sin())
            }
            Technique::Pan => {
                let side = if u[1] < 0.5 { 1.0 } else { -1.0 };
                let jitter = ((u[1] * 2.0).fract() * 2.0 - 1.0) * (10.0 * PI / 180.0);
                let yaw = base_yaw.unwrap_or(0.0) + side * 0.5 * PI + jitter;
                let (e0, e1) = elevation_range(t);
                direction_from_yaw_pitch(yaw, e0 + u[2] * (e1 - e0))
            }
            _ => {
                let yaw = match base_yaw {
                    Some(y) => y + (2.0 * u[1] - 1.0) * FACING_CONE,
                    None => u[1] * TAU,
                };
                let (e0, e1) = elevation_range(t);
                direction_from_yaw_pitch(yaw, e0 + u[2] * (e1 - e0))
            }
        };
        self.subject + dir * d
    }

    pub fn fov_for(&self, t: Technique, distance: f64) -> f64 {
        if let Some(f) = self.overrides.get(&t).and_then(|o| o.fov) {
            return f;
        }
        match t {
            Technique::CloseUp => 2.0 * (0.5 * CLOSE_UP_SPAN / CLOSE_UP_FILL / distance.max(1e-6)).atan(),
            _ => DEFAULT_FOV,
        }
        .clamp(MIN_FOV, MAX_FOV)
    }

    /// Outside the grid, inside an occupied cell, overlapping occupied cells
    /// or inside a target body.
    pub fn body_collides(&self, p: DVec3) -> bool {
        !self.grid.contains(p)
            || is_occupied(&self.grid, p)
            || self.grid.sphere_overlaps(p, CAMERA_RADIUS)
            || self.targets.iter().any(|s| s.contains(p))
    }

    /// Backward path from `p`, away from the subject, stays free.
    pub fn dolly_clear(&self, p: DVec3, travel: f64) -> bool {
        let back = (p - self.subject).normalize_or_zero();
        let end = p + back * travel;
        !self.body_collides(end) && capsule_cast(&self.grid, p, end, CAMERA_RADIUS)
    }

    /// Smallest distance from `from` to the technique's band-center points.
    pub fn band_center_distance(&self, t: Technique, from: DVec3) -> Option<f64> {
        let g = self.geometry.get(&t)?;
        g.centers.iter().map(|c| (*c - from).length()).min_by(f64::total_cmp)
    }
}

fn third_targets(first_x: f64) -> [(f64, f64); 4] {
    let x = first_x / 3.0;
    let y = 1.0 / 3.0;
    [(x, y), (-x, y), (x, -y), (-x, -y)]
}

/// Aim point that places `subject` on a thirds intersection.
///
/// With world up and no roll, the direction to the subject fixes the pitch in
/// closed form and the yaw follows from the horizontal components. Returns
/// `None` when no intersection is reachable, e.g. a subject almost straight
/// below the camera cannot sit on a vertical thirds line.
pub fn frame_thirds(position: DVec3, subject: DVec3, fov: f64, aspect: f64, facing: Option<DVec3>) -> Option<DVec3> {
    let to = subject - position;
    let dist = to.length();
    if dist < 1e-9 {
        return None;
    }
    let d = to / dist;
    let (right0, _, _) = camera_basis(d);
    let first_x = match facing {
        Some(f) if f.dot(right0) > 0.0 => -1.0,
        Some(_) => 1.0,
        None => -1.0,
    };
    let tan_half = (0.5 * fov).tan();
    for (tx, ty) in third_targets(first_x) {
        let v = DVec3::new(tx * tan_half * aspect, ty * tan_half, 1.0).normalize();
        // World y of the camera-frame vector v is vy cos(p) + vz sin(p).
        let r = v.y.hypot(v.z);
        if d.y.abs() > r {
            continue;
        }
        let phi = v.y.atan2(v.z);
        let pitch = (d.y / r).asin() - phi;
        if pitch.abs() >= 0.5 * PI - 1e-9 {
            continue;
        }
        let (_, up0, f0) = camera_basis(direction_from_yaw_pitch(0.0, pitch));
        let right0 = f0.cross(WORLD_UP).normalize();
        let w0 = right0 * v.x + up0 * v.y + f0 * v.z;
        if w0.x.hypot(w0.z) < 1e-12 {
            continue;
        }
        let yaw = d.x.atan2(d.z) - w0.x.atan2(w0.z);
        return Some(position + direction_from_yaw_pitch(yaw, pitch) * dist);
    }
    None
}

/// Distance in half-NDC units (frame half-extent = 0.5) from the projected
/// subject to the nearest thirds intersection.
pub fn rule_of_thirds_score(pose: &CameraPose, subject: DVec3) -> Result<f64, PlacementError> {
    let (x, y) = project_ndc(pose.position, pose.direction(), pose.fov, pose.aspect, subject)
        .ok_or(PlacementError::BehindCamera)?;
    let (hx, hy) = (0.5 * x, 0.5 * y);
    let t = 1.0 / 6.0;
    Ok([(t, t), (-t, t), (t, -t), (-t, -t)]
        .iter()
        .map(|(px, py)| ((hx - px).powi(2) + (hy - py).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min))
}

pub fn thirds_pass(pose: &CameraPose, subject: DVec3, obedience: f64) -> bool {
    if obedience <= 0.0 {
        return project_ndc(pose.position, pose.direction(), pose.fov, pose.aspect, subject).is_some();
    }
    rule_of_thirds_score(pose, subject).is_ok_and(|s| s <= (1.0 - obedience) * 0.5)
}

/// Collision, then visibility, then framing.
pub fn validate_placement(
    pose: &CameraPose,
    grid: &OccupancyGrid,
    subject: DVec3,
    targets: &[PosedShape],
    params: &RuleParams,
) -> Validation {
    let p = pose.position;
    if !grid.contains(p)
        || is_occupied(grid, p)
        || grid.sphere_overlaps(p, CAMERA_RADIUS)
        || targets.iter().any(|s| s.contains(p))
    {
        return Validation::Collision;
    }
    if !capsule_cast(grid, p, subject, CAMERA_RADIUS) {
        return Validation::Occluded;
    }
    if !thirds_pass(pose, subject, params.thirds_obedience) {
        return Validation::ThirdsFail;
    }
    Validation::Valid
}

/// Samples a pose in the technique's band; draws three uniforms.
pub fn propose_pose(
    technique: Technique,
    env: &MarkerEnv,
    rng: &mut SimRng,
    offset_framing: bool,
) -> Result<CameraPose, PlacementError> {
    if technique.category() != Category::Positioning {
        return Err(PlacementError::NoBand(technique));
    }
    let band = env.band(technique)?;
    let u = [rng.uniform(), rng.uniform(), rng.uniform()];
    let position = quantize_vec(env.band_position(technique, band, u));
    let fov = env.fov_for(technique, (position - env.subject).length());
    let look_at = if offset_framing {
        frame_thirds(position, env.subject, fov, DEFAULT_ASPECT, env.facing).unwrap_or(env.subject)
    } else {
        env.subject
    };
    Ok(CameraPose::new(position, look_at, fov, DEFAULT_ASPECT))
}

pub type Selections = BTreeMap<Category, Technique>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotPlan {
    pub marker_id: String,
    pub time: f64,
    pub targets: Vec<String>,
    pub dramatisation: f64,
    pub pace: f64,
    pub techniques: Selections,
    pub pose: CameraPose,
    /// Subject point the camera frames.
    pub focus_point: DVec3,
    pub technique_settings: BTreeMap<String, f64>,
    pub attempts: u32,
    pub degraded: bool,
    pub used_default: BTreeSet<Category>,
    pub rng_draws: u64,
}

impl ShotPlan {
    pub fn technique(&self, c: Category) -> Technique {
        self.techniques.get(&c).copied().unwrap_or(c.default_technique())
    }
}

fn technique_settings(env: &MarkerEnv, sel: &Selections, pose: &CameraPose, band: Option<Band>) -> BTreeMap<String, f64> {
    let mut s = BTreeMap::new();
    s.insert("distance".to_string(), (pose.position - env.subject).length());
    if let Some(b) = band {
        s.insert("band_min".into(), b.min);
        s.insert("band_max".into(), b.max);
    }
    let ov = |t: Technique| env.overrides.get(&t).copied().unwrap_or_default();
    match sel.get(&Category::Look) {
        Some(Technique::DollyZoom) => {
            s.insert("travel".into(), env.dolly_travel());
        }
        Some(Technique::QuickZoom) => {
            let o = ov(Technique::QuickZoom);
            s.insert("zoom_factor".into(), o.zoom_factor.unwrap_or(DEFAULT_QUICK_ZOOM));
            s.insert("duration".into(), o.duration.unwrap_or(DEFAULT_QUICK_ZOOM_DURATION));
        }
        Some(Technique::CloseUpZoom) => {
            let o = ov(Technique::CloseUpZoom);
            s.insert("zoom_factor".into(), o.zoom_factor.unwrap_or(DEFAULT_CLOSE_UP_ZOOM));
        }
        _ => {}
    }
    s.into_iter().map(|(k, v)| (k, quantize(v))).collect()
}

fn make_plan(
    env: &MarkerEnv,
    techniques: Selections,
    pose: CameraPose,
    band: Option<Band>,
    attempts: u32,
    degraded: bool,
    used_default: BTreeSet<Category>,
    rng_draws: u64,
) -> ShotPlan {
    let technique_settings = technique_settings(env, &techniques, &pose, band);
    ShotPlan {
        marker_id: env.marker.id.clone(),
        time: quantize(env.marker.time),
        targets: env.marker.targets.clone(),
        dramatisation: quantize(env.marker.dramatisation),
        pace: quantize(env.marker.pace),
        techniques,
        pose,
        focus_point: quantize_vec(env.subject),
        technique_settings,
        attempts,
        degraded,
        used_default,
        rng_draws,
    }
}

/// Best-effort pose for a degraded plan: the least occluded default probe.
fn fallback_pose(env: &MarkerEnv) -> CameraPose {
    let t = Category::Positioning.default_technique();
    let band = env.band(t).unwrap_or(Band { min: 1.0, max: 8.0 });
    let mut best: Option<(bool, f64, DVec3)> = None;
    for i in 0..PROBE_COUNT {
        let p = quantize_vec(env.band_position(t, band, probe_u(i)));
        let free = !env.body_collides(p);
        let len = (env.subject - p).length().max(1e-9);
        let clear = capsule_hit(&env.grid, p, env.subject, CAMERA_RADIUS).map_or(1.0, |h| h / len);
        let better = match best {
            None => true,
            Some((bf, bc, _)) => (free, clear) > (bf, bc),
        };
        if better {
            best = Some((free, clear, p));
        }
    }
    let p = best.map(|b| b.2).expect("at least one probe");
    CameraPose::new(p, env.subject, env.fov_for(t, (p - env.subject).length()), DEFAULT_ASPECT)
}

/// Selects techniques and places the camera for one marker.
///
/// `previous` and `next` are the neighboring plans that shot rules must
/// respect; `next` is only present when re-simulating between retained nodes.
pub fn place_camera(
    env: &MarkerEnv,
    previous: Option<&ShotPlan>,
    next: Option<&ShotPlan>,
    model: &CategoryModel,
    stats: &AggregateStats,
    rng: &mut SimRng,
) -> ShotPlan {
    let params = &env.params;
    let timeout = params.selection_timeout;
    let mut excluded = BTreeSet::new();
    let mut attempts = 0u32;
    loop {
        let ctx = SelectionContext {
            env,
            previous,
            next,
            current: BTreeMap::new(),
            excluded: excluded.clone(),
        };
        let sel = select_for_marker(&ctx, model, stats, rng);
        let pos_t = sel.per_category[&Category::Positioning];
        let fell_back = sel.used_default.contains(&Category::Positioning);
        if excluded.contains(&pos_t) {
            break;
        }
        let Ok(band) = env.band(pos_t) else {
            excluded.insert(pos_t);
            continue;
        };
        let dolly = sel.per_category.get(&Category::Look) == Some(&Technique::DollyZoom);
        for i in 0..timeout {
            attempts += 1;
            let pose = propose_pose(pos_t, env, rng, params.thirds_obedience > 0.0).expect("positioning band");
            let status = validate_placement(&pose, &env.grid, env.subject, &env.targets, params);
            let framed = match status {
                Validation::Valid => true,
                Validation::ThirdsFail => params.thirds_visibility_priority && i >= timeout / 2,
                Validation::Collision | Validation::Occluded => continue,
            };
            if !framed {
                continue;
            }
            if !fell_back {
                if let Some(prev) = previous {
                    if (pose.position - prev.pose.position).length() > params.max_transition_distance {
                        continue;
                    }
                }
            }
            if dolly && !env.dolly_clear(pose.position, env.dolly_travel()) {
                continue;
            }
            return make_plan(
                env,
                sel.per_category,
                pose,
                Some(band),
                attempts,
                false,
                sel.used_default,
                rng.draws(),
            );
        }
        excluded.insert(pos_t);
    }
    let defaults: Selections = Category::ORDER.iter().map(|c| (*c, c.default_technique())).collect();
    make_plan(
        env,
        defaults,
        fallback_pose(env),
        None,
        attempts,
        true,
        Category::ORDER.into_iter().collect(),
        rng.draws(),
    )
}
