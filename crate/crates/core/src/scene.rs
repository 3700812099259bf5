//! The assembled garden: terrain, roads, areas and placed objects.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::AnswerSource;
use crate::area::Area;
use crate::constraints::ConstraintSpec;
use crate::geometry::{Obb2D, TerrainGrid};
use crate::layout::PlacedObject;
use crate::road::RoadNetwork;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt: String,
    pub seed: u64,
    /// `rule`, `remote`, or `fallback` when any remote stage fell back.
    pub backend: String,
    /// Source of each agent answer, keyed by stage name.
    pub stages: BTreeMap<String, AnswerSource>,
    pub parameters: serde_json::Value,
    pub tool_version: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub revision: u64,
    pub terrain: TerrainGrid,
    pub roads: RoadNetwork,
    pub areas: Vec<Area>,
    pub constraints: ConstraintSpec,
    pub placements: Vec<PlacedObject>,
    pub provenance: Provenance,
}

/// A broken hard constraint in a placement set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HardViolation {
    Overlap { a: String, b: String },
    OutOfArea { object: String, area: String },
}

impl Scene {
    pub fn area(&self, id: &str) -> Option<&Area> {
        self.areas.iter().find(|a| a.id == id)
    }

    /// Looks a placement up by `area/instance`, bare instance name (first
    /// match), or list index.
    pub fn placement_index(&self, key: &str) -> Option<usize> {
        self.placements
            .iter()
            .position(|p| p.qualified_name() == key)
            .or_else(|| self.placements.iter().position(|p| p.instance == key))
            .or_else(|| key.parse::<usize>().ok().filter(|&i| i < self.placements.len()))
    }

    /// Exact overlap and containment checks over every placement.
    pub fn hard_violations(&self) -> Vec<HardViolation> {
        let fps: Vec<Obb2D> = self.placements.iter().map(|p| p.footprint()).collect();
        let mut out = Vec::new();
        for (i, p) in self.placements.iter().enumerate() {
            let inside = self.area(&p.area).is_some_and(|a| a.polygon.contains_rect(&fps[i]));
            if !inside {
                out.push(HardViolation::OutOfArea { object: p.qualified_name(), area: p.area.clone() });
            }
        }
        for i in 0..fps.len() {
            for j in i + 1..fps.len() {
                if fps[i].overlaps(&fps[j]) {
                    out.push(HardViolation::Overlap {
                        a: self.placements[i].qualified_name(),
                        b: self.placements[j].qualified_name(),
                    });
                }
            }
        }
        out
    }
}
