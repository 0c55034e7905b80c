use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the 15 annotated cinematography techniques.
///
/// The discriminant is the stable feature index used by the discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechniqueId {
    GodsEye = 0,
    CloseUp = 1,
    Master = 2,
    Pan = 3,
    Medium = 4,
    Long = 5,
    Free = 6,
    CloseUpZoom = 7,
    QuickZoom = 8,
    DollyZoom = 9,
    StationaryTracking = 10,
    HandheldTracking = 11,
    SteadycamTracking = 12,
    SlowMotion = 13,
    Cut = 14,
}

impl TechniqueId {
    pub const COUNT: usize = 15;

    pub const ALL: [TechniqueId; 15] = [
        TechniqueId::GodsEye,
        TechniqueId::CloseUp,
        TechniqueId::Master,
        TechniqueId::Pan,
        TechniqueId::Medium,
        TechniqueId::Long,
        TechniqueId::Free,
        TechniqueId::CloseUpZoom,
        TechniqueId::QuickZoom,
        TechniqueId::DollyZoom,
        TechniqueId::StationaryTracking,
        TechniqueId::HandheldTracking,
        TechniqueId::SteadycamTracking,
        TechniqueId::SlowMotion,
        TechniqueId::Cut,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// Key used in dataset files.
    pub fn key(self) -> &'static str {
        match self {
            TechniqueId::GodsEye => "gods_eye",
            TechniqueId::CloseUp => "close_up",
            TechniqueId::Master => "master",
            TechniqueId::Pan => "pan",
            TechniqueId::Medium => "medium",
            TechniqueId::Long => "long",
            TechniqueId::Free => "free",
            TechniqueId::CloseUpZoom => "close_up_zoom",
            TechniqueId::QuickZoom => "quick_zoom",
            TechniqueId::DollyZoom => "dolly_zoom",
            TechniqueId::StationaryTracking => "stationary_tracking",
            TechniqueId::HandheldTracking => "handheld_tracking",
            TechniqueId::SteadycamTracking => "steadycam_tracking",
            TechniqueId::SlowMotion => "slow_motion",
            TechniqueId::Cut => "cut",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.key() == key)
    }
}

impl fmt::Display for TechniqueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Camera manipulation stage. Declaration order is the processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Positioning,
    Look,
    Tracking,
    Fx,
}

impl Category {
    pub const ORDER: [Category; 4] = [
        Category::Positioning,
        Category::Look,
        Category::Tracking,
        Category::Fx,
    ];

    pub fn members(self) -> &'static [Technique] {
        use Technique::*;
        match self {
            Category::Positioning => &[CloseUp, GodsEye, Master, Medium, Long, Pan, Free],
            Category::Look => &[QuickZoom, DollyZoom, CloseUpZoom, StationaryShot],
            Category::Tracking => &[SteadycamTracking, HandheldTracking, NoTracking],
            Category::Fx => &[SlowMotion, NoFx],
        }
    }

    pub fn default_technique(self) -> Technique {
        match self {
            Category::Positioning => Technique::Free,
            Category::Look => Technique::StationaryShot,
            Category::Tracking => Technique::NoTracking,
            Category::Fx => Technique::NoFx,
        }
    }

    pub fn contains(self, technique: Technique) -> bool {
        technique.category() == self
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Positioning => "positioning",
            Category::Look => "look",
            Category::Tracking => "tracking",
            Category::Fx => "fx",
        })
    }
}

/// Where a selectable technique's frequency comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencySource {
    Annotated(TechniqueId),
    /// "Do nothing" mass: clip count minus the category's annotated members.
    Complement,
}

/// A technique that can be chosen in a category, including the non-annotated
/// category defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    CloseUp,
    GodsEye,
    Master,
    Medium,
    Long,
    Pan,
    Free,
    QuickZoom,
    DollyZoom,
    CloseUpZoom,
    StationaryShot,
    SteadycamTracking,
    HandheldTracking,
    NoTracking,
    SlowMotion,
    NoFx,
}

impl Technique {
    pub const ALL: [Technique; 16] = [
        Technique::CloseUp,
        Technique::GodsEye,
        Technique::Master,
        Technique::Medium,
        Technique::Long,
        Technique::Pan,
        Technique::Free,
        Technique::QuickZoom,
        Technique::DollyZoom,
        Technique::CloseUpZoom,
        Technique::StationaryShot,
        Technique::SteadycamTracking,
        Technique::HandheldTracking,
        Technique::NoTracking,
        Technique::SlowMotion,
        Technique::NoFx,
    ];

    pub fn category(self) -> Category {
        use Technique::*;
        match self {
            CloseUp | GodsEye | Master | Medium | Long | Pan | Free => Category::Positioning,
            QuickZoom | DollyZoom | CloseUpZoom | StationaryShot => Category::Look,
            SteadycamTracking | HandheldTracking | NoTracking => Category::Tracking,
            SlowMotion | NoFx => Category::Fx,
        }
    }

    /// Annotated stationary tracking feeds the Look category's stationary shot.
    pub fn frequency_source(self) -> FrequencySource {
        use FrequencySource::{Annotated, Complement};
        match self {
            Technique::CloseUp => Annotated(TechniqueId::CloseUp),
            Technique::GodsEye => Annotated(TechniqueId::GodsEye),
            Technique::Master => Annotated(TechniqueId::Master),
            Technique::Medium => Annotated(TechniqueId::Medium),
            Technique::Long => Annotated(TechniqueId::Long),
            Technique::Pan => Annotated(TechniqueId::Pan),
            Technique::Free => Annotated(TechniqueId::Free),
            Technique::QuickZoom => Annotated(TechniqueId::QuickZoom),
            Technique::DollyZoom => Annotated(TechniqueId::DollyZoom),
            Technique::CloseUpZoom => Annotated(TechniqueId::CloseUpZoom),
            Technique::StationaryShot => Annotated(TechniqueId::StationaryTracking),
            Technique::SteadycamTracking => Annotated(TechniqueId::SteadycamTracking),
            Technique::HandheldTracking => Annotated(TechniqueId::HandheldTracking),
            Technique::SlowMotion => Annotated(TechniqueId::SlowMotion),
            Technique::NoTracking | Technique::NoFx => Complement,
        }
    }

    pub fn annotated(self) -> Option<TechniqueId> {
        match self.frequency_source() {
            FrequencySource::Annotated(id) => Some(id),
            FrequencySource::Complement => None,
        }
    }

    pub fn is_fast_zoom(self) -> bool {
        matches!(self, Technique::QuickZoom | Technique::DollyZoom)
    }

    /// Tracking techniques that move the camera.
    pub fn moves_camera(self) -> bool {
        matches!(self, Technique::SteadycamTracking | Technique::HandheldTracking)
    }

    pub fn key(self) -> &'static str {
        match self {
            Technique::CloseUp => "close_up",
            Technique::GodsEye => "gods_eye",
            Technique::Master => "master",
            Technique::Medium => "medium",
            Technique::Long => "long",
            Technique::Pan => "pan",
            Technique::Free => "free",
            Technique::QuickZoom => "quick_zoom",
            Technique::DollyZoom => "dolly_zoom",
            Technique::CloseUpZoom => "close_up_zoom",
            Technique::StationaryShot => "stationary_shot",
            Technique::SteadycamTracking => "steadycam_tracking",
            Technique::HandheldTracking => "handheld_tracking",
            Technique::NoTracking => "no_tracking",
            Technique::SlowMotion => "slow_motion",
            Technique::NoFx => "no_fx",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Technique::ALL
            .iter()
            .copied()
            .find(|t| t.key() == s)
            .ok_or_else(|| format!("unknown technique `{s}`"))
    }
}
