use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::frame::FeatureGroup;
use crate::error::{Error, Result};
use crate::physics::TierKind;

/// Documentation/sensor availability level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    W,
    WB,
    WBR,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [ScenarioId::W, ScenarioId::WB, ScenarioId::WBR];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::W => "W",
            ScenarioId::WB => "WB",
            ScenarioId::WBR => "WBR",
        }
    }

    pub fn spec(self) -> ScenarioSpec {
        ScenarioSpec::new(self)
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W" => Ok(ScenarioId::W),
            "WB" => Ok(ScenarioId::WB),
            "WBR" => Ok(ScenarioId::WBR),
            other => Err(Error::invalid(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Which feature groups a scenario may read and which physics tier it pairs with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub allowed_groups: Vec<FeatureGroup>,
    pub physics_tier: TierKind,
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId) -> Self {
        use FeatureGroup::*;
        let (allowed_groups, physics_tier) = match id {
            ScenarioId::W => (vec![Datetime, Weather], TierKind::Archetype),
            ScenarioId::WB => (vec![Datetime, Weather, Building], TierKind::UncalibratedDetailed),
            ScenarioId::WBR => (
                vec![Datetime, Weather, Building, Room],
                TierKind::CalibratedDetailed,
            ),
        };
        ScenarioSpec {
            id,
            allowed_groups,
            physics_tier,
        }
    }

    pub fn allows(&self, group: FeatureGroup) -> bool {
        self.allowed_groups.contains(&group)
    }
}
