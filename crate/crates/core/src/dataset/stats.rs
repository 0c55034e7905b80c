use std::collections::BTreeMap;

use serde::Serialize;

use super::{Category, DirectorProfile, FrequencySource, Technique, TechniqueId};

/// Per-technique aggregates over all clips of one director.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateStats {
    /// `f_t`, indexed by technique code.
    pub total_frequency: [u64; TechniqueId::COUNT],
    /// Count-weighted mean clip dramatisation; only for techniques with `f_t > 0`.
    pub mean_dramatisation: BTreeMap<TechniqueId, f64>,
    pub mean_pace: BTreeMap<TechniqueId, f64>,
    pub clip_count: u64,
}

impl AggregateStats {
    pub fn frequency(&self, technique: TechniqueId) -> u64 {
        self.total_frequency[technique.code()]
    }

    /// Frequency of a selectable technique. Category defaults without an
    /// annotation get the clip count minus the annotated members, floored at 0.
    pub fn selectable_frequency(&self, technique: Technique) -> u64 {
        match technique.frequency_source() {
            FrequencySource::Annotated(id) => self.frequency(id),
            FrequencySource::Complement => {
                let annotated: u64 = technique
                    .category()
                    .members()
                    .iter()
                    .filter_map(|m| m.annotated())
                    .map(|id| self.frequency(id))
                    .sum();
                self.clip_count.saturating_sub(annotated)
            }
        }
    }

    pub fn technique_means(&self, technique: Technique) -> Option<(f64, f64)> {
        let id = technique.annotated()?;
        Some((
            *self.mean_dramatisation.get(&id)?,
            *self.mean_pace.get(&id)?,
        ))
    }
}

/// Column sums and count-weighted style means.
pub fn aggregate(profile: &DirectorProfile) -> AggregateStats {
    let mut total = [0u64; TechniqueId::COUNT];
    let mut drama = [0.0f64; TechniqueId::COUNT];
    let mut pace = [0.0f64; TechniqueId::COUNT];
    for clip in &profile.clips {
        for t in TechniqueId::ALL {
            let n = clip.count(t);
            if n > 0 {
                total[t.code()] += u64::from(n);
                drama[t.code()] += f64::from(n) * clip.dramatisation;
                pace[t.code()] += f64::from(n) * clip.pace;
            }
        }
    }
    let mut mean_dramatisation = BTreeMap::new();
    let mut mean_pace = BTreeMap::new();
    for t in TechniqueId::ALL {
        let f = total[t.code()];
        if f > 0 {
            mean_dramatisation.insert(t, drama[t.code()] / f as f64);
            mean_pace.insert(t, pace[t.code()] / f as f64);
        }
    }
    AggregateStats {
        total_frequency: total,
        mean_dramatisation,
        mean_pace,
        clip_count: profile.clips.len() as u64,
    }
}

/// `p(t|C)` for every selectable technique.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryModel {
    probabilities: BTreeMap<Technique, f64>,
    category_mass: BTreeMap<Category, u64>,
}

impl CategoryModel {
    /// Zero for techniques outside `category`.
    pub fn probability(&self, category: Category, technique: Technique) -> f64 {
        if !category.contains(technique) {
            return 0.0;
        }
        self.probabilities.get(&technique).copied().unwrap_or(0.0)
    }

    /// `Σ_{t∈C} f_t`; zero means the director never exercised the category.
    pub fn category_mass(&self, category: Category) -> u64 {
        self.category_mass.get(&category).copied().unwrap_or(0)
    }

    pub fn category_sum(&self, category: Category) -> f64 {
        category
            .members()
            .iter()
            .map(|t| self.probability(category, *t))
            .sum()
    }
}

pub fn conditional_probabilities(stats: &AggregateStats) -> CategoryModel {
    let mut probabilities = BTreeMap::new();
    let mut category_mass = BTreeMap::new();
    for category in Category::ORDER {
        let mass: u64 = category
            .members()
            .iter()
            .map(|t| stats.selectable_frequency(*t))
            .sum();
        category_mass.insert(category, mass);
        for t in category.members() {
            let p = if mass == 0 {
                0.0
            } else {
                stats.selectable_frequency(*t) as f64 / mass as f64
            };
            probabilities.insert(*t, p);
        }
    }
    CategoryModel {
        probabilities,
        category_mass,
    }
}
