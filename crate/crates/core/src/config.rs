//! Simulation parameters shared by selection, placement and the tools.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Technique;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameter `{field}`: {reason}")]
pub struct ParamsError {
    pub field: String,
    pub reason: String,
}

fn invalid(field: &str, reason: impl Into<String>) -> ParamsError {
    ParamsError {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Global rule settings. Serialized in camelCase, which is also the shape
/// accepted by partial updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct RuleParams {
    pub min_shot_distance: f64,
    pub max_shot_distance: f64,
    pub thirds_obedience: f64,
    /// When false, a pose that misses the thirds test is never accepted.
    pub thirds_visibility_priority: bool,
    pub max_transition_distance: f64,
    pub dramatisation_threshold: f64,
    pub pace_threshold: f64,
    pub preferences_enabled: bool,
    pub selection_timeout: u32,
    pub lead_time: f64,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self {
            min_shot_distance: 0.3,
            max_shot_distance: 40.0,
            thirds_obedience: 0.5,
            thirds_visibility_priority: true,
            max_transition_distance: 10.0,
            dramatisation_threshold: 0.35,
            pace_threshold: 0.35,
            preferences_enabled: true,
            selection_timeout: 16,
            lead_time: 0.3,
        }
    }
}

impl RuleParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let finite = [
            ("minShotDistance", self.min_shot_distance),
            ("maxShotDistance", self.max_shot_distance),
            ("thirdsObedience", self.thirds_obedience),
            ("maxTransitionDistance", self.max_transition_distance),
            ("dramatisationThreshold", self.dramatisation_threshold),
            ("paceThreshold", self.pace_threshold),
            ("leadTime", self.lead_time),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.min_shot_distance < 0.0 {
            return Err(invalid("minShotDistance", "must be non-negative"));
        }
        if self.min_shot_distance >= self.max_shot_distance {
            return Err(invalid("maxShotDistance", "must exceed minShotDistance"));
        }
        for (name, v) in [
            ("thirdsObedience", self.thirds_obedience),
            ("dramatisationThreshold", self.dramatisation_threshold),
            ("paceThreshold", self.pace_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("{v} outside [0, 1]")));
            }
        }
        if self.max_transition_distance <= 0.0 {
            return Err(invalid("maxTransitionDistance", "must be positive"));
        }
        if self.selection_timeout == 0 {
            return Err(invalid("selectionTimeout", "must be at least 1"));
        }
        if self.lead_time < 0.0 {
            return Err(invalid("leadTime", "must be non-negative"));
        }
        Ok(())
    }

    /// Applies a partial camelCase JSON object on top of `self`.
    pub fn patched(&self, patch: &serde_json::Value) -> Result<Self, ParamsError> {
        let serde_json::Value::Object(fields) = patch else {
            return Err(invalid("params", "patch must be a JSON object"));
        };
        let mut merged = serde_json::to_value(self).expect("params serialize");
        let target = merged.as_object_mut().expect("params object");
        for (k, v) in fields {
            if !target.contains_key(k) {
                return Err(invalid(k, "unknown parameter"));
            }
            target.insert(k.clone(), v.clone());
        }
        let out: RuleParams = serde_json::from_value(merged).map_err(|e| invalid("params", e.to_string()))?;
        out.validate()?;
        Ok(out)
    }
}

/// Per-technique overrides; unset fields keep built-in values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<f64>,
    /// Vertical field of view in radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov: Option<f64>,
    /// Dolly zoom backward travel in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub travel: Option<f64>,
    /// Final fov as a fraction of the initial fov for zooms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zoom_factor: Option<f64>,
    /// Quick zoom duration in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

pub type TechniqueOverrides = BTreeMap<Technique, TechniqueOverride>;

pub fn validate_overrides(overrides: &TechniqueOverrides) -> Result<(), ParamsError> {
    for (t, o) in overrides {
        let field = |name: &str| format!("techniques.{}.{name}", t.key());
        for (name, v) in [
            ("min_distance", o.min_distance),
            ("max_distance", o.max_distance),
            ("fov", o.fov),
            ("travel", o.travel),
            ("zoom_factor", o.zoom_factor),
            ("duration", o.duration),
        ] {
            if let Some(v) = v {
                if !v.is_finite() || v <= 0.0 {
                    return Err(invalid(&field(name), "must be positive and finite"));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (o.min_distance, o.max_distance) {
            if lo >= hi {
                return Err(invalid(&field("max_distance"), "must exceed min_distance"));
            }
        }
        if *t == Technique::CloseUp && o.max_distance.is_some_and(|d| d > 1.0) {
            return Err(invalid(&field("max_distance"), "close-ups stay within 1 m"));
        }
        if o.fov.is_some_and(|f| !(f > 0.17 && f < 2.6)) {
            return Err(invalid(&field("fov"), "outside (0.17, 2.6) rad"));
        }
        if o.zoom_factor.is_some_and(|z| z >= 1.0) {
            return Err(invalid(&field("zoom_factor"), "zooms narrow the fov (factor < 1)"));
        }
    }
    Ok(())
}
