//! Per-marker technique selection.
//!
//! Each category is decided in order by filtering its members through the
//! general (geometric) rules, the shot-based rules against neighboring plans
//! and the user preferences, then sampling the survivors in proportion to the
//! director model. An empty survivor set yields the category default.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::config::RuleParams;
use crate::dataset::{AggregateStats, Category, CategoryModel, Technique};
use crate::placement::{MarkerEnv, Selections, ShotPlan};
use crate::rng::SimRng;
use crate::scene::ShotMarker;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("cannot filter {category} before {missing} is decided")]
    OrderViolation { category: Category, missing: Category },
}

pub struct SelectionContext<'a> {
    pub env: &'a MarkerEnv,
    /// Plan of the preceding marker.
    pub previous: Option<&'a ShotPlan>,
    /// Retained plan of the following marker, present during re-simulation.
    pub next: Option<&'a ShotPlan>,
    /// Categories already decided for this marker.
    pub current: Selections,
    /// Positioning techniques that already timed out in placement.
    pub excluded: BTreeSet<Technique>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    pub per_category: Selections,
    pub used_default: BTreeSet<Category>,
    pub rng_draws: u64,
}

/// Geometric feasibility. Positioning members need a feasible probe in their
/// band; DollyZoom needs backward room from the chosen Positioning band.
pub fn filter_general(category: Category, ctx: &SelectionContext) -> Vec<Technique> {
    let env = ctx.env;
    category
        .members()
        .iter()
        .copied()
        .filter(|t| !ctx.excluded.contains(t))
        .filter(|t| match (category, t) {
            (Category::Positioning, _) => env.geometry(*t).is_some_and(|g| g.feasible),
            (Category::Look, Technique::DollyZoom) => {
                let pos = ctx
                    .current
                    .get(&Category::Positioning)
                    .copied()
                    .unwrap_or(Category::Positioning.default_technique());
                env.geometry(pos).is_some_and(|g| g.dolly_room)
            }
            _ => true,
        })
        .collect()
}

fn violates_pair(earlier: &ShotPlan, category: Category, t: Technique) -> bool {
    match category {
        Category::Look => t.is_fast_zoom() && earlier.technique(Category::Look).is_fast_zoom(),
        Category::Positioning => t == Technique::CloseUp && earlier.technique(Category::Positioning) == Technique::Master,
        Category::Fx => t == Technique::SlowMotion && earlier.technique(Category::Fx) == Technique::SlowMotion,
        Category::Tracking => false,
    }
}

fn violates_as_predecessor(later: &ShotPlan, category: Category, t: Technique) -> bool {
    match category {
        Category::Look => t.is_fast_zoom() && later.technique(Category::Look).is_fast_zoom(),
        Category::Positioning => t == Technique::Master && later.technique(Category::Positioning) == Technique::CloseUp,
        Category::Fx => t == Technique::SlowMotion && later.technique(Category::Fx) == Technique::SlowMotion,
        Category::Tracking => false,
    }
}

/// Cross-marker restrictions against the previous plan and, when present,
/// the retained next plan.
pub fn filter_shot_based(
    category: Category,
    candidates: &[Technique],
    ctx: &SelectionContext,
) -> Result<Vec<Technique>, SelectionError> {
    if category == Category::Tracking && !ctx.current.contains_key(&Category::Look) {
        return Err(SelectionError::OrderViolation {
            category,
            missing: Category::Look,
        });
    }
    let params = &ctx.env.params;
    Ok(candidates
        .iter()
        .copied()
        .filter(|t| {
            if let Some(prev) = ctx.previous {
                if violates_pair(prev, category, *t) {
                    return false;
                }
                if category == Category::Positioning {
                    let far = ctx
                        .env
                        .band_center_distance(*t, prev.pose.position)
                        .is_some_and(|d| d > params.max_transition_distance);
                    if far {
                        return false;
                    }
                }
            }
            if let Some(next) = ctx.next {
                if violates_as_predecessor(next, category, *t) {
                    return false;
                }
            }
            !(category == Category::Tracking
                && ctx.current.get(&Category::Look) == Some(&Technique::DollyZoom)
                && t.moves_camera())
        })
        .collect())
}

/// Keeps techniques whose mean dramatisation and pace are within the
/// thresholds of the marker's. Techniques without means are only kept when no
/// candidate has means to compare.
pub fn filter_preferences(
    candidates: &[Technique],
    marker: &ShotMarker,
    stats: &AggregateStats,
    params: &RuleParams,
) -> Vec<Technique> {
    if !params.preferences_enabled || !marker.use_preferences {
        return candidates.to_vec();
    }
    let with_means: Vec<_> = candidates
        .iter()
        .filter_map(|t| stats.technique_means(*t).map(|m| (*t, m)))
        .collect();
    if with_means.is_empty() {
        return candidates.to_vec();
    }
    with_means
        .into_iter()
        .filter(|(_, (d, p))| {
            (d - marker.dramatisation).abs() <= params.dramatisation_threshold
                && (p - marker.pace).abs() <= params.pace_threshold
        })
        .map(|(t, _)| t)
        .collect()
}

/// Draws one technique in proportion to `p(t|C)` renormalized over the
/// candidates; uniform when they all have zero probability. Empty sets and
/// categories without any observed mass give the category default, and
/// singletons return without drawing.
pub fn sample_technique(category: Category, candidates: &[Technique], model: &CategoryModel, rng: &mut SimRng) -> Technique {
    sample_or_default(category, candidates, model, rng).0
}

fn sample_or_default(category: Category, candidates: &[Technique], model: &CategoryModel, rng: &mut SimRng) -> (Technique, bool) {
    match candidates {
        [] => return (category.default_technique(), true),
        [only] => return (*only, false),
        _ if model.category_mass(category) == 0 => return (category.default_technique(), true),
        _ => {}
    }
    (sample_nonempty(category, candidates, model, rng), false)
}

fn sample_nonempty(category: Category, candidates: &[Technique], model: &CategoryModel, rng: &mut SimRng) -> Technique {
    match candidates {
        [] => unreachable!("caller checks emptiness"),
        [only] => *only,
        _ => {
            let weights: Vec<f64> = candidates.iter().map(|t| model.probability(category, *t)).collect();
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return candidates[rng.index(candidates.len())];
            }
            let mut positive = candidates.iter().zip(&weights).filter(|(_, w)| **w > 0.0);
            if let (Some((t, _)), None) = (positive.next(), positive.next()) {
                return *t;
            }
            let mut u = rng.uniform() * total;
            for (t, w) in candidates.iter().zip(&weights) {
                if u < *w {
                    return *t;
                }
                u -= w;
            }
            // Rounding can leave u marginally above the last weight.
            *candidates
                .iter()
                .zip(&weights)
                .rev()
                .find(|(_, w)| **w > 0.0)
                .map(|(t, _)| t)
                .expect("positive total")
        }
    }
}

pub fn select_for_marker(
    ctx: &SelectionContext,
    model: &CategoryModel,
    stats: &AggregateStats,
    rng: &mut SimRng,
) -> SelectionResult {
    let start = rng.draws();
    let mut working = SelectionContext {
        env: ctx.env,
        previous: ctx.previous,
        next: ctx.next,
        current: ctx.current.clone(),
        excluded: ctx.excluded.clone(),
    };
    let mut used_default = BTreeSet::new();
    for category in Category::ORDER {
        if working.current.contains_key(&category) {
            continue;
        }
        let general = filter_general(category, &working);
        let shot = filter_shot_based(category, &general, &working).expect("categories processed in order");
        let preferred = filter_preferences(&shot, &ctx.env.marker, stats, &ctx.env.params);
        let (t, fell_back) = sample_or_default(category, &preferred, model, rng);
        if fell_back {
            used_default.insert(category);
        }
        working.current.insert(category, t);
    }
    SelectionResult {
        per_category: working.current,
        used_default,
        rng_draws: rng.draws() - start,
    }
}

/// Whether a consecutive pair of plans breaks one of the four cross-marker
/// restrictions.
pub fn rule_violations(prev: &ShotPlan, next: &ShotPlan) -> Vec<&'static str> {
    let mut out = Vec::new();
    if prev.technique(Category::Look).is_fast_zoom() && next.technique(Category::Look).is_fast_zoom() {
        out.push("consecutive fast zooms");
    }
    if prev.technique(Category::Positioning) == Technique::Master && next.technique(Category::Positioning) == Technique::CloseUp {
        out.push("master into close-up");
    }
    if prev.technique(Category::Fx) == Technique::SlowMotion && next.technique(Category::Fx) == Technique::SlowMotion {
        out.push("consecutive slow motion");
    }
    for plan in [prev, next] {
        if plan.technique(Category::Look) == Technique::DollyZoom && plan.technique(Category::Tracking).moves_camera() {
            out.push("dolly zoom with moving tracking");
        }
    }
    out
}

/// Same as [`rule_violations`] for the single-plan restriction only.
pub fn plan_violations(plan: &ShotPlan) -> bool {
    plan.technique(Category::Look) == Technique::DollyZoom && plan.technique(Category::Tracking).moves_camera()
}

pub fn selections(pairs: &[(Category, Technique)]) -> Selections {
    pairs.iter().copied().collect::<BTreeMap<_, _>>()
}
