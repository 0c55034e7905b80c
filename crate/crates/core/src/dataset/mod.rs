//! Director imitation datasets.
//!
//! A dataset holds one annotated vector per movie clip: how often each of the
//! 15 techniques occurs, plus the clip's dramatisation and pace in `[0, 1]`.
//! From it we derive per-technique frequencies, the per-category conditional
//! probabilities that drive shot selection, and a logistic-regression
//! discriminator that checks whether two directors are separable at all.

mod logreg;
mod stats;
mod synth;
mod technique;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use logreg::{
    accuracy, cross_validate, feature_importance, loss_and_gradient, predict_director,
    train_discriminator, FeatureScaler, LogRegModel, TrainConfig,
};
pub use stats::{aggregate, conditional_probabilities, AggregateStats, CategoryModel};
pub use synth::{synthesize_dataset, DirectorSpec, SynthSpec, TechniqueUsage};
pub use technique::{Category, FrequencySource, Technique, TechniqueId};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{field} = {value} is outside [0, 1] (clip {clip})")]
    Range {
        clip: usize,
        field: &'static str,
        value: f64,
    },
    #[error("director profile has no clips")]
    EmptyProfile,
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
}

/// One annotated clip: technique counts indexed by [`TechniqueId::code`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClipAnnotation {
    pub counts: [u32; TechniqueId::COUNT],
    pub dramatisation: f64,
    pub pace: f64,
    pub source: String,
}

impl ClipAnnotation {
    pub fn count(&self, technique: TechniqueId) -> u32 {
        self.counts[technique.code()]
    }

    /// Raw feature vector for the discriminator.
    pub fn features(&self) -> [f64; TechniqueId::COUNT] {
        self.counts.map(f64::from)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectorProfile {
    pub director: String,
    pub clips: Vec<ClipAnnotation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    director: String,
    clips: Vec<RawClip>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClip {
    counts: BTreeMap<String, u32>,
    dramatisation: f64,
    pace: f64,
    #[serde(default)]
    source: String,
}

impl DirectorProfile {
    pub fn new(director: impl Into<String>, clips: Vec<ClipAnnotation>) -> Result<Self, DatasetError> {
        let profile = Self {
            director: director.into(),
            clips,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.director.trim().is_empty() {
            return Err(DatasetError::Schema("director name is empty".into()));
        }
        if self.clips.is_empty() {
            return Err(DatasetError::EmptyProfile);
        }
        for (i, clip) in self.clips.iter().enumerate() {
            for (field, value) in [("dramatisation", clip.dramatisation), ("pace", clip.pace)] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(DatasetError::Range { clip: i, field, value });
                }
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, DatasetError> {
        let raw: RawProfile =
            serde_json::from_slice(bytes).map_err(|e| DatasetError::Schema(e.to_string()))?;
        let mut clips = Vec::with_capacity(raw.clips.len());
        for (i, rc) in raw.clips.into_iter().enumerate() {
            let mut counts = [0u32; TechniqueId::COUNT];
            for (key, value) in &rc.counts {
                let id = TechniqueId::from_key(key).ok_or_else(|| {
                    DatasetError::Schema(format!("clip {i}: unknown technique `{key}`"))
                })?;
                counts[id.code()] = *value;
            }
            if let Some(missing) = TechniqueId::ALL
                .iter()
                .find(|t| !rc.counts.contains_key(t.key()))
            {
                return Err(DatasetError::Schema(format!(
                    "clip {i}: missing technique `{}`",
                    missing.key()
                )));
            }
            clips.push(ClipAnnotation {
                counts,
                dramatisation: rc.dramatisation,
                pace: rc.pace,
                source: rc.source,
            });
        }
        Self::new(raw.director, clips)
    }

    pub fn to_json(&self) -> String {
        let raw = RawProfile {
            director: self.director.clone(),
            clips: self
                .clips
                .iter()
                .map(|c| RawClip {
                    counts: TechniqueId::ALL
                        .iter()
                        .map(|t| (t.key().to_string(), c.count(*t)))
                        .collect(),
                    dramatisation: c.dramatisation,
                    pace: c.pace,
                    source: c.source.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&raw).expect("profile serializes");
        s.push('\n');
        s
    }
}

/// Parses a director dataset document.
pub fn load_director_profile(bytes: &[u8]) -> Result<DirectorProfile, DatasetError> {
    DirectorProfile::from_json(bytes)
}

#[cfg(test)]
pub(crate) fn clip(pairs: &[(TechniqueId, u32)], dramatisation: f64, pace: f64) -> ClipAnnotation {
    let mut counts = [0; TechniqueId::COUNT];
    for (t, n) in pairs {
        counts[t.code()] = *n;
    }
    ClipAnnotation {
        counts,
        dramatisation,
        pace,
        source: String::new(),
    }
}
