//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runtime budgets are part of each criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dircam_core::config::RuleParams;
use dircam_core::dataset::{
    conditional_probabilities, cross_validate, loss_and_gradient, synthesize_dataset, AggregateStats, Category,
    SynthSpec, Technique, TechniqueId, TrainConfig,
};
use dircam_core::demo::{demo_inputs, stress_inputs};
use dircam_core::geometry::Aabb;
use dircam_core::placement::ShotPlan;
use dircam_core::playback::{execute, export_track, CameraTrack, PlaybackConfig, TrackFormat};
use dircam_core::project::{write_demo_project, DemoKind, Project};
use dircam_core::proxy::{is_occupied, raycast, OccupancyGrid};
use dircam_core::rng::SimRng;
use dircam_core::selection::{plan_violations, rule_violations, sample_technique};
use dircam_core::scene::{stop_times, REST_SPEED};
use dircam_core::storyboard::{resimulate, save_storyboard, simulate_all, SimulationConfig, SimulationInputs, Storyboard};
use glam::DVec3;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn config(seed: u64) -> SimulationConfig {
    SimulationConfig {
        seed,
        params: RuleParams::default(),
        techniques: Default::default(),
        dataset_path: "director.json".into(),
        scene_path: "scene.json".into(),
    }
}

// ---------------------------------------------------------------------------
// Conditional probabilities

/// Selectable frequency written out from the annotation schema. Defaults
/// without an annotation take the clips that used no annotated member.
fn direct_frequency(stats: &AggregateStats, t: Technique) -> f64 {
    let f = |id: TechniqueId| stats.total_frequency[id.code()] as f64;
    let clips = stats.clip_count as f64;
    match t {
        Technique::CloseUp => f(TechniqueId::CloseUp),
        Technique::GodsEye => f(TechniqueId::GodsEye),
        Technique::Master => f(TechniqueId::Master),
        Technique::Medium => f(TechniqueId::Medium),
        Technique::Long => f(TechniqueId::Long),
        Technique::Pan => f(TechniqueId::Pan),
        Technique::Free => f(TechniqueId::Free),
        Technique::QuickZoom => f(TechniqueId::QuickZoom),
        Technique::DollyZoom => f(TechniqueId::DollyZoom),
        Technique::CloseUpZoom => f(TechniqueId::CloseUpZoom),
        Technique::StationaryShot => f(TechniqueId::StationaryTracking),
        Technique::SteadycamTracking => f(TechniqueId::SteadycamTracking),
        Technique::HandheldTracking => f(TechniqueId::HandheldTracking),
        Technique::NoTracking => (clips - f(TechniqueId::SteadycamTracking) - f(TechniqueId::HandheldTracking)).max(0.0),
        Technique::SlowMotion => f(TechniqueId::SlowMotion),
        Technique::NoFx => (clips - f(TechniqueId::SlowMotion)).max(0.0),
    }
}

fn random_stats(rng: &mut SimRng) -> AggregateStats {
    let mut total_frequency = [0u64; TechniqueId::COUNT];
    let sparse = rng.uniform() < 0.3;
    for f in total_frequency.iter_mut() {
        let zero = sparse && rng.uniform() < 0.7;
        *f = if zero { 0 } else { rng.index(500) as u64 };
    }
    AggregateStats {
        total_frequency,
        mean_dramatisation: BTreeMap::new(),
        mean_pace: BTreeMap::new(),
        clip_count: if rng.coin() { 0 } else { rng.index(400) as u64 },
    }
}

fn eq1_correctness() -> Outcome {
    let mut rng = SimRng::new(0xE01);
    let mut worst = 0.0f64;
    let mut bad_sums = 0;
    let mut zero_categories = 0;
    for _ in 0..500 {
        let stats = random_stats(&mut rng);
        let model = conditional_probabilities(&stats);
        for c in Category::ORDER {
            let mass: f64 = c.members().iter().map(|t| direct_frequency(&stats, *t)).sum();
            for t in c.members() {
                let expected = if mass == 0.0 { 0.0 } else { direct_frequency(&stats, *t) / mass };
                worst = worst.max((model.probability(c, *t) - expected).abs());
            }
            let sum = model.category_sum(c);
            if sum == 0.0 {
                zero_categories += 1;
            } else if (sum - 1.0).abs() > 1e-9 {
                bad_sums += 1;
            }
        }
    }
    outcome(
        worst <= 1e-12 && bad_sums == 0,
        format!("max |err| {worst:.1e}, bad sums {bad_sums}, empty categories {zero_categories}"),
    )
}

// ---------------------------------------------------------------------------
// Sampling fidelity

fn sampling_fidelity() -> Outcome {
    let mut total_frequency = [0u64; TechniqueId::COUNT];
    for (id, n) in [
        (TechniqueId::CloseUp, 50),
        (TechniqueId::GodsEye, 120),
        (TechniqueId::Master, 30),
        (TechniqueId::Medium, 200),
        (TechniqueId::Long, 80),
        (TechniqueId::Pan, 10),
        (TechniqueId::Free, 5),
    ] {
        total_frequency[id.code()] = n;
    }
    let stats = AggregateStats {
        total_frequency,
        mean_dramatisation: BTreeMap::new(),
        mean_pace: BTreeMap::new(),
        clip_count: 100,
    };
    let model = conditional_probabilities(&stats);
    let candidates = [Technique::CloseUp, Technique::GodsEye, Technique::Long];
    let draws = 100_000;
    let mut rng = SimRng::new(0x5A3F);
    let mut counts = [0u64; 3];
    for _ in 0..draws {
        let t = sample_technique(Category::Positioning, &candidates, &model, &mut rng);
        let i = candidates.iter().position(|c| *c == t).expect("draw is a candidate");
        counts[i] += 1;
    }
    let weights: Vec<f64> = candidates.iter().map(|t| model.probability(Category::Positioning, *t)).collect();
    let total: f64 = weights.iter().sum();
    let chi2: f64 = counts
        .iter()
        .zip(&weights)
        .map(|(&o, w)| {
            let e = draws as f64 * w / total;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new(2.0).expect("dof").cdf(chi2);
    outcome(p > 0.01, format!("counts {counts:?}, chi2 {chi2:.3}, p {p:.3}"))
}

// ---------------------------------------------------------------------------
// Shot rules

fn shot_rule_exhaustion() -> Outcome {
    let inputs = stress_inputs(&RuleParams::default()).expect("stress inputs");
    let mut violations = 0usize;
    let mut first_violation = None;
    let mut usage: BTreeMap<Technique, usize> = BTreeMap::new();
    for seed in 0..10_000u64 {
        let sb = simulate_all(&inputs, config(seed));
        for n in &sb.nodes {
            for t in n.plan.techniques.values() {
                *usage.entry(*t).or_default() += 1;
            }
            if plan_violations(&n.plan) {
                violations += 1;
                first_violation.get_or_insert((seed, n.plan.marker_id.clone()));
            }
        }
        for w in sb.nodes.windows(2) {
            let v = rule_violations(&w[0].plan, &w[1].plan);
            // Single-plan restriction is already counted above.
            let cross = v.iter().filter(|r| !r.starts_with("dolly")).count();
            if cross > 0 {
                violations += cross;
                first_violation.get_or_insert((seed, w[1].plan.marker_id.clone()));
            }
        }
    }
    let exercised = [Technique::Master, Technique::CloseUp, Technique::QuickZoom, Technique::DollyZoom, Technique::SlowMotion]
        .iter()
        .map(|t| format!("{}={}", t.key(), usage.get(t).copied().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(" ");
    outcome(
        violations == 0,
        format!("violations {violations} (first {first_violation:?}); usage {exercised}"),
    )
}

// ---------------------------------------------------------------------------
// Close-up distance

fn close_up_bound() -> Outcome {
    let params = RuleParams::default();
    let scenes = [
        ("demo", demo_inputs(&params).expect("demo inputs")),
        ("stress", stress_inputs(&params).expect("stress inputs")),
    ];
    let mut close_ups = 0usize;
    let mut worst = 0.0f64;
    let mut exceptions = 0usize;
    for (_, inputs) in &scenes {
        for seed in 0..1000u64 {
            let sb = simulate_all(inputs, config(seed));
            for n in &sb.nodes {
                if n.plan.technique(Category::Positioning) != Technique::CloseUp {
                    continue;
                }
                close_ups += 1;
                let d = (n.plan.pose.position - n.plan.focus_point).length();
                worst = worst.max(d);
                if d > 1.0 {
                    exceptions += 1;
                }
            }
        }
    }
    outcome(
        close_ups > 0 && exceptions == 0,
        format!("{close_ups} close-up plans, max distance {worst:.4} m, exceptions {exceptions}"),
    )
}

// ---------------------------------------------------------------------------
// Raycast

fn slab_entry(cell: &Aabb, from: DVec3, to: DVec3) -> Option<f64> {
    let d = to - from;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for a in 0..3 {
        if d[a] == 0.0 {
            if from[a] < cell.min[a] || from[a] > cell.max[a] {
                return None;
            }
        } else {
            let t0 = (cell.min[a] - from[a]) / d[a];
            let t1 = (cell.max[a] - from[a]) / d[a];
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
    }
    (lo <= hi).then_some(lo * d.length())
}

fn brute_blocked(grid: &OccupancyGrid, from: DVec3, to: DVec3) -> bool {
    let len = (to - from).length();
    let step = grid.cell_size / 20.0;
    let steps = (len / step).ceil() as usize;
    (0..=steps).any(|i| {
        let s = (i as f64 * step).min(len);
        let p = if len > 0.0 { from + (to - from) * (s / len) } else { from };
        is_occupied(grid, p)
    })
}

/// Shortest length of segment inside any single occupied cell.
fn shortest_occupied_chord(grid: &OccupancyGrid, from: DVec3, to: DVec3) -> f64 {
    let len = (to - from).length();
    let [nx, ny, nz] = grid.dims;
    let mut best = f64::INFINITY;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !grid.is_cell_occupied([i, j, k]) {
                    continue;
                }
                let b = grid.cell_box([i, j, k]);
                if let (Some(enter), Some(exit)) = (slab_entry(&b, from, to), slab_entry(&b, to, from)) {
                    best = best.min(len - enter - exit);
                }
            }
        }
    }
    best
}

fn raycast_oracle() -> Outcome {
    const N: usize = 16;
    let mut rng = SimRng::new(0xDDA);
    let mut blocked_disagree = 0;
    let mut under_sampled = 0;
    let mut slab_disagree = 0;
    let mut worst = 0.0f64;
    let mut hits = 0;
    for _ in 0..1000 {
        let cell = rng.range(0.1, 0.6);
        let origin = DVec3::new(rng.range(-5.0, 5.0), rng.range(-5.0, 5.0), rng.range(-5.0, 5.0));
        let mut g = OccupancyGrid::with_dims(origin, cell, [N; 3], "oracle");
        let density = rng.range(0.005, 0.05);
        for k in 0..N {
            for j in 0..N {
                for i in 0..N {
                    if rng.uniform() < density {
                        g.set_occupied([i, j, k]);
                    }
                }
            }
        }
        let b = g.bounds();
        let margin = 2.0 * cell;
        let mut pick = || {
            DVec3::new(
                rng.range(b.min.x - margin, b.max.x + margin),
                rng.range(b.min.y - margin, b.max.y + margin),
                rng.range(b.min.z - margin, b.max.z + margin),
            )
        };
        let (from, to) = (pick(), pick());
        let hit = raycast(&g, from, to);
        if hit.is_some() != brute_blocked(&g, from, to) {
            blocked_disagree += 1;
            if shortest_occupied_chord(&g, from, to) < cell / 20.0 {
                under_sampled += 1;
            }
        }
        let mut expected: Option<f64> = None;
        for k in 0..N {
            for j in 0..N {
                for i in 0..N {
                    if g.is_cell_occupied([i, j, k]) {
                        if let Some(s) = slab_entry(&g.cell_box([i, j, k]), from, to) {
                            expected = Some(expected.map_or(s, |e| e.min(s)));
                        }
                    }
                }
            }
        }
        match (hit, expected) {
            (Some(h), Some(e)) => {
                hits += 1;
                worst = worst.max((h - e).abs());
                if (h - e).abs() > 1e-9 {
                    slab_disagree += 1;
                }
            }
            (None, None) => {}
            _ => slab_disagree += 1,
        }
    }
    outcome(
        blocked_disagree == 0 && slab_disagree == 0,
        format!(
            "brute-force disagreements {blocked_disagree} ({under_sampled} on chords shorter than the step), slab disagreements {slab_disagree}, {hits} hits, max |err| {worst:.1e} m"
        ),
    )
}

// ---------------------------------------------------------------------------
// Discriminator

fn discriminator() -> Outcome {
    let (a, b) = synthesize_dataset(&SynthSpec::default(), 0);
    let n = a.clips.len() + b.clips.len();
    let cv = match cross_validate(&a.clips, &b.clips, 5, &TrainConfig::default()) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("cross-validation failed: {e}")),
    };

    let mut rng = SimRng::new(0x6AD);
    let xs: Vec<[f64; TechniqueId::COUNT]> = a.clips.iter().chain(&b.clips).map(|c| c.features()).collect();
    let ys: Vec<f64> = (0..n).map(|i| if i < a.clips.len() { 0.0 } else { 1.0 }).collect();
    let mut w = [0.0; TechniqueId::COUNT];
    for x in w.iter_mut() {
        *x = rng.range(-0.3, 0.3);
    }
    let bias = rng.range(-0.5, 0.5);
    let (_, gw, gb) = loss_and_gradient(&w, bias, &xs, &ys);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let rel = |analytic: f64, numeric: f64| (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
    for j in 0..TechniqueId::COUNT {
        let (mut wp, mut wm) = (w, w);
        wp[j] += h;
        wm[j] -= h;
        let numeric = (loss_and_gradient(&wp, bias, &xs, &ys).0 - loss_and_gradient(&wm, bias, &xs, &ys).0) / (2.0 * h);
        worst = worst.max(rel(gw[j], numeric));
    }
    let numeric_b = (loss_and_gradient(&w, bias + h, &xs, &ys).0 - loss_and_gradient(&w, bias - h, &xs, &ys).0) / (2.0 * h);
    worst = worst.max(rel(gb, numeric_b));
    // Seed spread of the same generator, reported for context only.
    let spread: Vec<f64> = (1..20u64)
        .filter_map(|seed| {
            let (a, b) = synthesize_dataset(&SynthSpec::default(), seed);
            cross_validate(&a.clips, &b.clips, 5, &TrainConfig::default()).ok()
        })
        .chain([cv])
        .collect();
    let mean = spread.iter().sum::<f64>() / spread.len() as f64;
    let lo = spread.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = spread.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        cv >= 0.75 && worst <= 1e-5,
        format!(
            "{n} clips, 5-fold accuracy {cv:.4} (seeds 0..20: mean {mean:.3}, range {lo:.3}..{hi:.3}), gradient rel err {worst:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// Locks

fn node_bytes(sb: &Storyboard, k: usize) -> Vec<u8> {
    serde_json::to_vec(&sb.nodes[k]).expect("node serializes")
}

fn lock_invariance() -> Outcome {
    let inputs = stress_inputs(&RuleParams::default()).expect("stress inputs");
    let base = simulate_all(&inputs, config(7));
    let ids: Vec<String> = base.nodes.iter().map(|n| n.plan.marker_id.clone()).collect();
    let mut mismatches = 0;
    let mut resims = 0;
    let mut others_changed = 0;
    for k in 0..ids.len() {
        let mut sb = base.clone();
        sb.nodes[k].locked = true;
        let locked = node_bytes(&sb, k);
        let others: BTreeSet<String> = ids.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, id)| id.clone()).collect();
        for seed in 0..20u64 {
            sb = match resimulate(&sb, &inputs, &others, 1000 + seed) {
                Ok(next) => next,
                Err(e) => return outcome(false, format!("resimulation failed: {e}")),
            };
            resims += 1;
            if node_bytes(&sb, k) != locked {
                mismatches += 1;
            }
            if (0..ids.len()).any(|i| i != k && node_bytes(&sb, i) != node_bytes(&base, i)) {
                others_changed += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && others_changed > 0,
        format!("{resims} re-simulations, locked-node mismatches {mismatches}, runs that changed other nodes {others_changed}"),
    )
}

// ---------------------------------------------------------------------------
// Playback

#[derive(Default)]
struct PlaybackStats {
    frames: usize,
    occupied: usize,
    jumps: usize,
    max_in_segment_step: f64,
    dolly_segments: usize,
    dolly_worst: f64,
    slow_segments: usize,
    slow_worst: f64,
    lead_windows: usize,
    lead_worst: f64,
}

fn segment_ranges(track: &CameraTrack) -> Vec<(usize, std::ops::Range<usize>)> {
    let mut out: Vec<(usize, std::ops::Range<usize>)> = Vec::new();
    for (i, &s) in track.segment_of_frame.iter().enumerate() {
        match out.last_mut() {
            Some((node, r)) if *node == s => r.end = i + 1,
            _ => out.push((s, i..i + 1)),
        }
    }
    out
}

fn check_track(
    track: &CameraTrack,
    sb: &Storyboard,
    inputs: &SimulationInputs,
    grids: &[OccupancyGrid],
    config: &PlaybackConfig,
    stats: &mut PlaybackStats,
) {
    let scene = &inputs.scene;
    stats.frames += track.frames.len();
    for (f, &node) in track.frames.iter().zip(&track.segment_of_frame) {
        let grid = grids.iter().find(|g| g.marker_id == sb.nodes[node].plan.marker_id).expect("grid");
        if is_occupied(grid, f.position) {
            stats.occupied += 1;
        }
    }
    for (node, range) in segment_ranges(track) {
        let plan: &ShotPlan = &sb.nodes[node].plan;
        let frames = &track.frames[range];
        for w in frames.windows(2) {
            let step = (w[1].position - w[0].position).length();
            stats.max_in_segment_step = stats.max_in_segment_step.max(step);
            if step > 0.5 {
                stats.jumps += 1;
            }
        }
        if plan.technique(Category::Look) == Technique::DollyZoom {
            stats.dolly_segments += 1;
            let k = |f: &dircam_core::playback::CameraFrame| {
                let subject = scene.subject_point(&plan.targets, f.scene_time).expect("subject");
                (subject - f.position).length() * (f.fov * 0.5).tan()
            };
            let k0 = k(&frames[0]);
            for f in frames {
                stats.dolly_worst = stats.dolly_worst.max((k(f) - k0).abs() / k0);
            }
        }
        if plan.technique(Category::Fx) == Technique::SlowMotion {
            stats.slow_segments += 1;
            for f in frames {
                stats.slow_worst = stats.slow_worst.max((f.time_scale - config.slow_mo_factor).abs());
            }
            for w in frames.windows(2) {
                let slope = (w[1].scene_time - w[0].scene_time) / (w[1].wall_time - w[0].wall_time);
                stats.slow_worst = stats.slow_worst.max((slope - config.slow_mo_factor).abs());
            }
        }
        if plan.technique(Category::Tracking).moves_camera() {
            let start = frames[0].scene_time;
            let end = frames[frames.len() - 1].scene_time;
            for id in &plan.targets {
                let obj = scene.object(id).expect("target");
                for s in stop_times(&obj.track) {
                    if s <= start || s > end + 1e-9 {
                        continue;
                    }
                    let from = (s - config.lead_time).max(start);
                    let window: Vec<_> = frames
                        .iter()
                        .filter(|f| f.scene_time >= from - 1e-9 && f.scene_time <= s + 1e-9)
                        .collect();
                    stats.lead_windows += 1;
                    for w in window.windows(2) {
                        let v = (w[1].position - w[0].position).length() / (w[1].wall_time - w[0].wall_time);
                        stats.lead_worst = stats.lead_worst.max(v);
                    }
                }
            }
        }
    }
}

fn playback_invariants() -> Outcome {
    let inputs = demo_inputs(&RuleParams::default()).expect("demo inputs");
    let grids: Vec<OccupancyGrid> = inputs.grids.iter().map(|g| (**g).clone()).collect();
    let mut stats = PlaybackStats::default();
    let seeds = 0..40u64;
    let tracks = seeds.end;
    for seed in seeds {
        let sb = simulate_all(&inputs, config(seed));
        let pc = PlaybackConfig {
            fps: 30.0,
            lead_time: sb.config.params.lead_time,
            noise_seed: seed,
            ..Default::default()
        };
        let track = match execute(&sb, &inputs.scene, &inputs.timeline, &grids, &pc) {
            Ok(t) => t,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        check_track(&track, &sb, &inputs, &grids, &pc, &mut stats);
    }
    let exercised = stats.dolly_segments > 0 && stats.slow_segments > 0 && stats.lead_windows > 0;
    let ok = exercised
        && stats.occupied == 0
        && stats.jumps == 0
        && stats.dolly_worst <= 0.01
        && stats.slow_worst <= 1e-6
        && stats.lead_worst <= REST_SPEED;
    outcome(
        ok,
        format!(
            "{tracks} tracks, {} frames; occupied {}; in-segment jumps {} (max step {:.3} m); dolly {} segs max dev {:.1e}; \
             slow-mo {} segs max slope err {:.1e}; lead {} windows max speed {:.1e} m/s",
            stats.frames,
            stats.occupied,
            stats.jumps,
            stats.max_in_segment_step,
            stats.dolly_segments,
            stats.dolly_worst,
            stats.slow_segments,
            stats.slow_worst,
            stats.lead_windows,
            stats.lead_worst,
        ),
    )
}

// ---------------------------------------------------------------------------
// End-to-end determinism

fn simulate_and_play(seed: u64) -> Result<(Vec<u8>, Vec<u8>), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = write_demo_project(dir.path(), DemoKind::Demo).map_err(|e| e.to_string())?;
    let project = Project::load(&path).map_err(|e| e.to_string())?;
    let (grids, _) = project.grids(false).map_err(|e| e.to_string())?;
    let inputs = project.inputs(grids.clone()).map_err(|e| e.to_string())?;
    let sb = simulate_all(&inputs, project.simulation_config(seed));
    project.save_outputs(&sb, None).map_err(|e| e.to_string())?;
    // Playback reads everything back from disk, as a separate invocation would.
    let reloaded = Project::load(&path).map_err(|e| e.to_string())?;
    let sb = reloaded.load_storyboard().map_err(|e| e.to_string())?;
    let (grids, baked) = reloaded.grids(false).map_err(|e| e.to_string())?;
    if baked {
        return Err("grid cache was not reused".into());
    }
    let pc = PlaybackConfig {
        fps: 30.0,
        lead_time: sb.config.params.lead_time,
        noise_seed: sb.config.seed,
        ..Default::default()
    };
    let track = execute(&sb, &reloaded.scene, &reloaded.timeline, &grids, &pc).map_err(|e| e.to_string())?;
    let csv = export_track(&track, TrackFormat::Csv);
    let stored = std::fs::read(reloaded.storyboard_path()).map_err(|e| e.to_string())?;
    if stored != save_storyboard(&sb) {
        return Err("storyboard does not survive a load/save cycle".into());
    }
    Ok((stored, csv))
}

fn determinism() -> Outcome {
    match (simulate_and_play(42), simulate_and_play(42)) {
        (Ok(a), Ok(b)) => outcome(
            a == b,
            format!("storyboard {} bytes, track {} bytes, identical {}", a.0.len(), a.1.len(), a == b),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

// ---------------------------------------------------------------------------

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "conditional probabilities",
            budget: Some(Duration::from_secs(1)),
            run: eq1_correctness,
        },
        Criterion {
            name: "sampling fidelity",
            budget: Some(Duration::from_secs(5)),
            run: sampling_fidelity,
        },
        Criterion {
            name: "shot-rule exhaustion",
            budget: Some(Duration::from_secs(60)),
            run: shot_rule_exhaustion,
        },
        Criterion {
            name: "close-up bound",
            budget: None,
            run: close_up_bound,
        },
        Criterion {
            name: "raycast oracle",
            budget: None,
            run: raycast_oracle,
        },
        Criterion {
            name: "discriminator",
            budget: Some(Duration::from_secs(10)),
            run: discriminator,
        },
        Criterion {
            name: "lock invariance",
            budget: None,
            run: lock_invariance,
        },
        Criterion {
            name: "playback invariants",
            budget: Some(Duration::from_secs(10)),
            run: playback_invariants,
        },
        Criterion {
            name: "end-to-end determinism",
            budget: None,
            run: determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = c.budget.is_none_or(|b| elapsed <= b);
        let ok = result.ok && in_budget;
        if !ok {
            failed += 1;
        }
        let budget = c.budget.map(|b| format!(" / budget {:.0?}", b)).unwrap_or_default();
        println!(
            "{} {}: {} [{:.2?}{}]",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            result.detail,
            elapsed,
            budget
        );
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
