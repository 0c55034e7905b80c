//! Seeded generator for synthetic two-director datasets.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{ClipAnnotation, DirectorProfile, TechniqueId};
use crate::rng::derive_seed;

/// How often a technique shows up in a clip and how many times when it does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueUsage {
    /// Probability that a clip contains the technique at all.
    pub occurrence: f64,
    /// Mean count given occurrence (`1 + Poisson(mean_count - 1)`).
    pub mean_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectorSpec {
    pub name: String,
    /// Techniques missing from the map never occur.
    pub usage: BTreeMap<TechniqueId, TechniqueUsage>,
    pub dramatisation: (f64, f64),
    pub pace: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub clips_per_director: usize,
    pub directors: [DirectorSpec; 2],
}

fn usage(pairs: &[(TechniqueId, f64, f64)]) -> BTreeMap<TechniqueId, TechniqueUsage> {
    pairs
        .iter()
        .map(|(t, occurrence, mean_count)| {
            (
                *t,
                TechniqueUsage {
                    occurrence: *occurrence,
                    mean_count: *mean_count,
                },
            )
        })
        .collect()
}

impl Default for SynthSpec {
    /// Two directors anchored on the published occurrence gaps: overhead shots
    /// in 33.7% vs 8.75% of clips and steadycam tracking in 12.4% vs 24.6%.
    /// The remaining techniques carry smaller gaps in the same direction as the
    /// reported feature weights.
    fn default() -> Self {
        use TechniqueId::*;
        let a = DirectorSpec {
            name: "director_a".into(),
            usage: usage(&[
                (GodsEye, 0.337, 1.3),
                (CloseUp, 0.80, 3.0),
                (Master, 0.30, 1.2),
                (Pan, 0.25, 1.2),
                (Medium, 0.70, 2.5),
                (Long, 0.20, 1.2),
                (Free, 0.30, 1.5),
                (CloseUpZoom, 0.30, 1.3),
                (QuickZoom, 0.40, 1.6),
                (DollyZoom, 0.06, 1.0),
                (StationaryTracking, 0.50, 1.5),
                (HandheldTracking, 0.15, 1.2),
                (SteadycamTracking, 0.124, 1.3),
                (SlowMotion, 0.10, 1.0),
                (Cut, 1.0, 9.0),
            ]),
            dramatisation: (0.35, 1.0),
            pace: (0.2, 0.8),
        };
        let b = DirectorSpec {
            name: "director_b".into(),
            usage: usage(&[
                (GodsEye, 0.0875, 1.1),
                (CloseUp, 0.55, 2.0),
                (Master, 0.25, 1.2),
                (Pan, 0.30, 1.2),
                (Medium, 0.60, 2.2),
                (Long, 0.30, 1.3),
                (Free, 0.35, 1.5),
                (CloseUpZoom, 0.15, 1.2),
                (QuickZoom, 0.20, 1.3),
                (DollyZoom, 0.15, 1.0),
                (StationaryTracking, 0.45, 1.5),
                (HandheldTracking, 0.40, 1.6),
                (SteadycamTracking, 0.246, 1.4),
                (SlowMotion, 0.25, 1.2),
                (Cut, 1.0, 10.0),
            ]),
            dramatisation: (0.2, 0.9),
            pace: (0.4, 1.0),
        };
        Self {
            clips_per_director: 80,
            directors: [a, b],
        }
    }
}

fn generate(spec: &DirectorSpec, clips: usize, seed: u64) -> DirectorProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(clips);
    for i in 0..clips {
        let mut counts = [0u32; TechniqueId::COUNT];
        for t in TechniqueId::ALL {
            let Some(u) = spec.usage.get(&t) else {
                continue;
            };
            if rng.random::<f64>() >= u.occurrence {
                continue;
            }
            let extra = if u.mean_count > 1.0 {
                let p = Poisson::new(u.mean_count - 1.0).expect("positive rate");
                p.sample(&mut rng) as u32
            } else {
                0
            };
            counts[t.code()] = 1 + extra;
        }
        let (d0, d1) = spec.dramatisation;
        let (p0, p1) = spec.pace;
        out.push(ClipAnnotation {
            counts,
            dramatisation: crate::math::quantize(rng.random_range(d0..=d1)),
            pace: crate::math::quantize(rng.random_range(p0..=p1)),
            source: format!("{}/clip{:03}", spec.name, i + 1),
        });
    }
    DirectorProfile {
        director: spec.name.clone(),
        clips: out,
    }
}

/// Generates one profile per director; deterministic in `seed`.
pub fn synthesize_dataset(spec: &SynthSpec, seed: u64) -> (DirectorProfile, DirectorProfile) {
    (
        generate(&spec.directors[0], spec.clips_per_director, derive_seed(seed, 0)),
        generate(&spec.directors[1], spec.clips_per_director, derive_seed(seed, 1)),
    )
}
