//! The agent chain: prompt interpretation, asset selection and constraint
//! generation behind one backend trait.

mod remote;
mod rules;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::area::{describe, Area};
use crate::assets::{AssetLibrary, AssetRecord};
use crate::constraints::AreaConstraints;
use crate::geometry::{TerrainClass, TerrainGrid};
use crate::road::RoadParams;
use crate::terrain::TerrainParams;

pub use remote::{RemoteBackend, RemoteBackendConfig, DEFAULT_API_KEY_ENV};
pub use rules::{RuleBackend, RuleTables, BUNDLED_RULES};

pub const PROMPT_TERRAIN: &str = include_str!("../../data/prompts/terrain.txt");
pub const PROMPT_ROAD: &str = include_str!("../../data/prompts/road.txt");
pub const PROMPT_SELECTION: &str = include_str!("../../data/prompts/selection.txt");
pub const PROMPT_CONSTRAINTS: &str = include_str!("../../data/prompts/constraints.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("asset library is empty")]
    EmptyLibrary,
    #[error("nothing selected for area {0}")]
    EmptySelection(String),
    #[error("remote backend unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("invalid rule tables: {0}")]
    InvalidRules(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theme {
    Normal,
    Hydric,
    Floral,
    ArchDense,
    Mazy,
}

impl Theme {
    pub const ALL: [Theme; 5] = [Theme::Normal, Theme::Hydric, Theme::Floral, Theme::ArchDense, Theme::Mazy];

    pub fn as_str(self) -> &'static str {
        match self {
            Theme::Normal => "normal",
            Theme::Hydric => "hydric",
            Theme::Floral => "floral",
            Theme::ArchDense => "arch_dense",
            Theme::Mazy => "mazy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.trim().to_lowercase().replace(['-', ' '], "_");
        Self::ALL.into_iter().find(|t| t.as_str() == norm)
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptInterpretation {
    pub terrain: TerrainParams,
    pub roads: RoadParams,
    pub themes: Vec<Theme>,
}

/// Where an answer came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Rule,
    Remote,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer<T> {
    pub value: T,
    pub source: AnswerSource,
    pub warnings: Vec<String>,
}

impl<T> Answer<T> {
    pub fn rule(value: T) -> Self {
        Self { value, source: AnswerSource::Rule, warnings: Vec::new() }
    }
}

/// What an agent needs to know about one area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaBrief {
    pub id: String,
    pub area_m2: f64,
    pub class: TerrainClass,
    pub water_adjacent: bool,
    pub road_adjacent: bool,
    pub position: String,
    pub size: String,
    pub is_largest: bool,
    /// Position of the area in the size-descending area list.
    #[serde(default)]
    pub rank: usize,
    pub summary: String,
}

impl AreaBrief {
    pub fn new(area: &Area, grid: &TerrainGrid, rank: usize) -> Self {
        Self {
            id: area.id.clone(),
            area_m2: area.area_m2,
            class: area.dominant_class,
            water_adjacent: area.water_adjacent,
            road_adjacent: area.road_adjacent,
            position: area.position_token(grid).to_string(),
            size: area.size_token().to_string(),
            is_largest: rank == 0,
            rank,
            summary: describe(area, grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionItem {
    pub asset: AssetRecord,
    pub count: usize,
}

/// One object instance inside an area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedObject {
    pub instance: String,
    pub asset: AssetRecord,
}

/// Expands counts into named instances: a single copy keeps the asset name,
/// repeated copies become `name#1`, `name#2`, ...
pub fn expand_instances(items: &[SelectionItem]) -> Vec<SelectedObject> {
    let mut out = Vec::new();
    for item in items {
        for k in 1..=item.count {
            let instance =
                if item.count == 1 { item.asset.name.clone() } else { format!("{}#{k}", item.asset.name) };
            out.push(SelectedObject { instance, asset: item.asset.clone() });
        }
    }
    out
}

pub fn total_footprint(items: &[SelectionItem]) -> f64 {
    items.iter().map(|i| i.asset.footprint() * i.count as f64).sum()
}

pub trait AgentBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn interpret_prompt(&self, text: &str) -> Result<Answer<PromptInterpretation>, AgentError>;

    fn select_assets(
        &self,
        lib: &AssetLibrary,
        area: &AreaBrief,
        themes: &[Theme],
    ) -> Result<Answer<Vec<SelectionItem>>, AgentError>;

    fn generate_constraints(
        &self,
        area: &AreaBrief,
        selected: &[SelectedObject],
        themes: &[Theme],
    ) -> Result<Answer<AreaConstraints>, AgentError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_numbered_only_when_repeated() {
        let lib = AssetLibrary::bundled();
        let items = vec![
            SelectionItem { asset: lib.get("main hall").unwrap().clone(), count: 1 },
            SelectionItem { asset: lib.get("black pine").unwrap().clone(), count: 2 },
        ];
        let names: Vec<String> = expand_instances(&items).into_iter().map(|o| o.instance).collect();
        assert_eq!(names, vec!["main hall", "black pine#1", "black pine#2"]);
        assert!((total_footprint(&items) - (126.0 + 32.0)).abs() < 1e-9);
    }

    #[test]
    fn theme_spellings() {
        assert_eq!(Theme::parse("Arch-Dense"), Some(Theme::ArchDense));
        assert_eq!(Theme::parse("rainy"), None);
        assert_eq!(serde_json::to_string(&Theme::ArchDense).unwrap(), "\"arch_dense\"");
    }
}
