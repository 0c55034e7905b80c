//! Built-in scenes and datasets: a small courtyard demo and a six-marker
//! stress variant used by the property and acceptance suites.

use std::f64::consts::FRAC_PI_2;

use glam::DVec3;

use crate::config::{RuleParams, TechniqueOverrides};
use crate::dataset::{aggregate, ClipAnnotation, DirectorProfile, SynthSpec, TechniqueId};
use crate::dataset::synthesize_dataset;
use crate::proxy::bake;
use crate::scene::{Keyframe, KeyframeTrack, ProxyVolume, SceneDescription, SceneObject, Shape, ShotMarker, Timeline};
use crate::storyboard::{SimulationInputs, StoryboardError};

fn key(time: f64, x: f64, z: f64, yaw: f64) -> Keyframe {
    Keyframe {
        time,
        position: DVec3::new(x, 0.9, z),
        rotation: DVec3::new(yaw, 0.0, 0.0),
    }
}

fn character(id: &str, keys: Vec<Keyframe>) -> SceneObject {
    SceneObject {
        id: id.into(),
        shape: Shape::Capsule {
            radius: 0.25,
            half_height: 0.65,
        },
        track: KeyframeTrack::new(keys),
        is_character: true,
        is_static: false,
        subject_offset: DVec3::new(0.0, 0.7, 0.0),
    }
}

fn block(id: &str, center: [f64; 3], half: [f64; 3], yaw: f64) -> SceneObject {
    SceneObject {
        id: id.into(),
        shape: Shape::Box {
            half_extents: DVec3::from_array(half),
        },
        track: KeyframeTrack::constant(DVec3::from_array(center), DVec3::new(yaw, 0.0, 0.0)),
        is_character: false,
        is_static: true,
        subject_offset: DVec3::ZERO,
    }
}

fn marker(id: &str, time: f64, targets: &[&str], dramatisation: f64, pace: f64) -> ShotMarker {
    ShotMarker {
        id: id.into(),
        time,
        targets: targets.iter().map(|s| s.to_string()).collect(),
        dramatisation,
        pace,
        use_preferences: true,
        locked: false,
    }
}

fn courtyard() -> Vec<SceneObject> {
    vec![
        block("ground", [2.0, -0.25, 3.0], [21.0, 0.25, 21.5], 0.0),
        block("building", [-5.0, 2.0, 6.0], [2.0, 2.0, 2.0], 0.0),
        block("low_wall", [2.0, 0.5, -3.0], [3.0, 0.5, 0.15], 0.0),
        block("pillar", [7.5, 1.5, 1.0], [0.3, 1.5, 0.3], 0.0),
        block("crate", [1.5, 0.4, 4.5], [0.4, 0.4, 0.4], 0.3),
        // The hero walks east, stops, turns north, walks and stops again.
        character(
            "hero",
            vec![
                key(0.0, 0.0, 0.0, FRAC_PI_2),
                key(3.0, 4.0, 0.0, FRAC_PI_2),
                key(5.0, 4.0, 0.0, 0.0),
                key(8.0, 4.0, 5.0, 0.0),
                key(12.0, 4.0, 5.0, 0.0),
            ],
        ),
        character(
            "friend",
            vec![key(0.0, 8.0, 7.0, -FRAC_PI_2), key(4.0, 6.5, 5.0, -FRAC_PI_2), key(12.0, 6.5, 5.0, -FRAC_PI_2)],
        ),
    ]
}

fn courtyard_proxy() -> ProxyVolume {
    ProxyVolume {
        min: DVec3::new(-19.0, -0.5, -18.0),
        max: DVec3::new(23.0, 14.0, 25.0),
        cell_size: 0.25,
    }
}

/// Four-marker courtyard scene with two walking characters.
pub fn demo_scene() -> (SceneDescription, Timeline) {
    let scene = SceneDescription { objects: courtyard() };
    let timeline = Timeline {
        duration: 12.0,
        markers: vec![
            marker("m1", 0.0, &["hero"], 0.4, 0.6),
            marker("m2", 2.0, &["hero"], 0.6, 0.5),
            marker("m3", 5.0, &["hero", "friend"], 0.5, 0.4),
            marker("m4", 8.5, &["friend"], 0.7, 0.3),
        ],
        proxies: vec![courtyard_proxy()],
    };
    (scene, timeline)
}

/// The courtyard with added clutter around the path and six markers.
pub fn stress_scene() -> (SceneDescription, Timeline) {
    let mut objects = courtyard();
    objects.push(block("alley_n", [2.0, 1.5, 1.3], [1.5, 1.5, 0.15], 0.0));
    objects.push(block("alley_s", [2.0, 1.5, -1.3], [1.5, 1.5, 0.15], 0.0));
    objects.push(block("awning", [4.0, 2.8, 2.5], [1.2, 0.1, 1.0], 0.0));
    objects.push(block("barrel", [5.0, 0.5, 3.0], [0.35, 0.5, 0.35], 0.0));
    let scene = SceneDescription { objects };
    let timeline = Timeline {
        duration: 12.0,
        markers: vec![
            marker("s1", 0.0, &["hero"], 0.3, 0.7),
            marker("s2", 1.5, &["hero"], 0.5, 0.5),
            marker("s3", 3.5, &["hero", "friend"], 0.6, 0.4),
            marker("s4", 5.5, &["hero"], 0.7, 0.6),
            marker("s5", 7.5, &["friend"], 0.4, 0.3),
            marker("s6", 10.0, &["hero", "friend"], 0.5, 0.5),
        ],
        proxies: vec![courtyard_proxy()],
    };
    (scene, timeline)
}

/// Synthetic director used by the demo project.
pub fn demo_profile() -> DirectorProfile {
    synthesize_dataset(&SynthSpec::default(), 1).0
}

/// A director that leans hard on every technique the shot rules restrict,
/// so rule conflicts arise on almost every marker pair.
pub fn stress_profile() -> DirectorProfile {
    use TechniqueId::*;
    let rows: [&[(TechniqueId, u32)]; 6] = [
        &[(Master, 3), (CloseUp, 3), (QuickZoom, 3), (DollyZoom, 2), (SlowMotion, 4), (SteadycamTracking, 2), (Cut, 6)],
        &[(Master, 2), (CloseUp, 4), (DollyZoom, 3), (HandheldTracking, 3), (SlowMotion, 3), (Medium, 1), (Cut, 5)],
        &[(GodsEye, 1), (Master, 2), (QuickZoom, 4), (SteadycamTracking, 3), (SlowMotion, 2), (Pan, 1), (Cut, 7)],
        &[(CloseUp, 2), (Long, 1), (DollyZoom, 3), (CloseUpZoom, 1), (HandheldTracking, 2), (SlowMotion, 3), (Cut, 4)],
        &[(Master, 3), (Free, 1), (QuickZoom, 2), (StationaryTracking, 1), (SteadycamTracking, 2), (SlowMotion, 2), (Cut, 6)],
        &[(CloseUp, 3), (Medium, 1), (DollyZoom, 2), (QuickZoom, 2), (HandheldTracking, 2), (SlowMotion, 4), (Cut, 5)],
    ];
    let clips = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut counts = [0u32; TechniqueId::COUNT];
            for (t, n) in row.iter() {
                counts[t.code()] = *n;
            }
            ClipAnnotation {
                counts,
                dramatisation: (40 + 4 * i) as f64 / 100.0,
                pace: (60 - 4 * i) as f64 / 100.0,
                source: format!("stress/clip{:02}", i + 1),
            }
        })
        .collect();
    DirectorProfile::new("stress_director", clips).expect("valid stress profile")
}

fn inputs_for(
    (scene, timeline): (SceneDescription, Timeline),
    profile: &DirectorProfile,
    params: &RuleParams,
) -> Result<SimulationInputs, StoryboardError> {
    let grids = bake(&scene, &timeline)?;
    SimulationInputs::new(scene, timeline, grids, aggregate(profile), params, &TechniqueOverrides::new())
}

pub fn demo_inputs(params: &RuleParams) -> Result<SimulationInputs, StoryboardError> {
    inputs_for(demo_scene(), &demo_profile(), params)
}

pub fn stress_inputs(params: &RuleParams) -> Result<SimulationInputs, StoryboardError> {
    inputs_for(stress_scene(), &stress_profile(), params)
}
