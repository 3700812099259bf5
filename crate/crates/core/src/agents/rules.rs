//! Deterministic keyword and rule-table backend.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    AgentBackend, AgentError, Answer, AreaBrief, PromptInterpretation, SelectedObject, SelectionItem, Theme,
};
use crate::assets::{tokenize, AssetCategory, AssetLibrary, AssetRecord};
use crate::constraints::{AreaConstraints, Constraint, ConstraintKind};
use crate::road::RoadParams;
use crate::terrain::{TerrainClassParams, TerrainParams};

pub const BUNDLED_RULES: &str = include_str!("../../data/rules.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub terrain: TerrainParams,
    pub roads: RoadParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cue {
    pub words: Vec<String>,
    #[serde(default)]
    pub theme: Option<Theme>,
    #[serde(default)]
    pub water_coverage: Option<f64>,
    #[serde(default)]
    pub complexity: Option<f64>,
    #[serde(default)]
    pub ground_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRules {
    pub area_per_object_m2: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub footprint_ratio: f64,
    pub max_plant_copies: usize,
    /// Architecture records per area; arch_dense themes allow one more.
    pub max_architecture: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTables {
    pub version: u32,
    pub baseline: Baseline,
    pub cues: Vec<Cue>,
    pub theme_queries: BTreeMap<Theme, String>,
    pub area_queries: BTreeMap<String, String>,
    pub selection: SelectionRules,
}

impl RuleTables {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_RULES).expect("bundled rule tables are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        let t: RuleTables = serde_json::from_str(text).map_err(|e| AgentError::InvalidRules(e.to_string()))?;
        t.baseline.terrain.validate().map_err(|e| AgentError::InvalidRules(e.to_string()))?;
        let s = &t.selection;
        if s.area_per_object_m2 <= 0.0 || s.min_objects == 0 || s.min_objects > s.max_objects {
            return Err(AgentError::InvalidRules("bad selection budget".into()));
        }
        if !(0.0..=1.0).contains(&s.footprint_ratio) {
            return Err(AgentError::InvalidRules("footprint_ratio outside [0, 1]".into()));
        }
        Ok(t)
    }

    /// Object budget for an area of the given size.
    pub fn budget(&self, area_m2: f64) -> usize {
        let s = &self.selection;
        ((area_m2 / s.area_per_object_m2).floor() as usize).clamp(s.min_objects, s.max_objects)
    }

    pub fn footprint_limit(&self, area_m2: f64) -> f64 {
        self.selection.footprint_ratio * area_m2
    }

    /// Retrieval query for an area under the given themes.
    pub fn area_query(&self, area: &AreaBrief, themes: &[Theme]) -> String {
        let mut keys: Vec<&str> = Vec::new();
        if area.water_adjacent {
            keys.push("water_adjacent");
        }
        if area.road_adjacent {
            keys.push("road_adjacent");
        }
        keys.push(&area.size);
        keys.push(if area.position == "center" { "center" } else { "edge" });
        let mut parts: Vec<&str> = keys.iter().filter_map(|k| self.area_queries.get(*k)).map(String::as_str).collect();
        parts.extend(themes.iter().filter_map(|t| self.theme_queries.get(t)).map(String::as_str));
        parts.join(" ")
    }
}

#[derive(Debug, Clone)]
pub struct RuleBackend {
    tables: RuleTables,
}

impl Default for RuleBackend {
    fn default() -> Self {
        Self::new(RuleTables::bundled())
    }
}

fn word_matches(token: &str, word: &str) -> bool {
    token == word || token.strip_suffix('s').is_some_and(|t| t == word || t.strip_suffix('e') == Some(word))
}

impl RuleBackend {
    pub fn new(tables: RuleTables) -> Self {
        Self { tables }
    }

    pub fn tables(&self) -> &RuleTables {
        &self.tables
    }

    pub fn interpret(&self, text: &str) -> Result<PromptInterpretation, AgentError> {
        let tokens = tokenize(text);
        if tokens.is_empty() && text.trim().is_empty() {
            return Err(AgentError::EmptyPrompt);
        }
        let base = &self.tables.baseline;
        let mut terrain = base.terrain;
        let mut roads = base.roads;
        let mut themes = BTreeSet::new();
        let mut ground_scale = 1.0;
        for cue in &self.tables.cues {
            let hit = cue.words.iter().any(|w| tokens.iter().any(|t| word_matches(t, w)));
            if !hit {
                continue;
            }
            if let Some(t) = cue.theme {
                themes.insert(t);
            }
            if let Some(c) = cue.water_coverage {
                terrain.waterbody.coverage = c;
            }
            if let Some(c) = cue.complexity {
                roads.complexity = c;
            }
            if let Some(s) = cue.ground_scale {
                ground_scale = s;
            }
        }
        terrain.ground.coverage = (terrain.ground.coverage * ground_scale).min(1.0);
        let taken = terrain.waterbody.coverage + terrain.ground.coverage;
        if taken + terrain.land.coverage > 1.0 {
            terrain.land.coverage = (1.0 - taken).max(0.0);
        }
        if terrain.land.coverage <= 0.0 {
            terrain.land = TerrainClassParams::ABSENT;
        }
        let rest = 1.0 - taken - terrain.land.coverage;
        terrain.outside = if rest > 1e-9 {
            TerrainClassParams { exists: true, coverage: rest, ..base.terrain.outside }
        } else {
            TerrainClassParams::ABSENT
        };
        if themes.is_empty() {
            themes.insert(Theme::Normal);
        }
        Ok(PromptInterpretation { terrain, roads, themes: themes.into_iter().collect() })
    }

    /// Ranked candidates for an area: retrieval hits first, rotated by the
    /// area's rank so that sibling areas start from different hits, then the
    /// rest of the library by name.
    pub fn candidates<'a>(&self, lib: &'a AssetLibrary, area: &AreaBrief, themes: &[Theme]) -> Vec<&'a AssetRecord> {
        let query = self.tables.area_query(area, themes);
        let mut ranked: Vec<&AssetRecord> = lib.query(&query, lib.len(), None).into_iter().map(|(r, _)| r).collect();
        if !ranked.is_empty() {
            let shift = area.rank % ranked.len();
            ranked.rotate_left(shift);
        }
        let seen: BTreeSet<&str> = ranked.iter().map(|r| r.name.as_str()).collect();
        let mut tail: Vec<&AssetRecord> = lib.records().iter().filter(|r| !seen.contains(r.name.as_str())).collect();
        tail.sort_by(|a, b| a.name.cmp(&b.name));
        ranked.into_iter().chain(tail).collect()
    }

    pub fn needs_architecture(area: &AreaBrief, themes: &[Theme]) -> bool {
        area.is_largest || (themes.contains(&Theme::ArchDense) && area.size != "small" && area.road_adjacent)
    }

    pub fn select(
        &self,
        lib: &AssetLibrary,
        area: &AreaBrief,
        themes: &[Theme],
    ) -> Result<Vec<SelectionItem>, AgentError> {
        if lib.is_empty() {
            return Err(AgentError::EmptyLibrary);
        }
        let budget = self.tables.budget(area.area_m2);
        let limit = self.tables.footprint_limit(area.area_m2);
        let order = self.candidates(lib, area, themes);
        let mut items: Vec<SelectionItem> = Vec::new();
        let mut used = 0.0;
        let mut count = 0;
        let mut arch_count = 0;
        let arch_cap = self.tables.selection.max_architecture + usize::from(themes.contains(&Theme::ArchDense));

        if Self::needs_architecture(area, themes) {
            if let Some(a) =
                order.iter().find(|r| r.category == AssetCategory::Architecture && r.footprint() <= limit)
            {
                items.push(SelectionItem { asset: (*a).clone(), count: 1 });
                used += a.footprint();
                count += 1;
                arch_count += 1;
            }
        }
        for rec in order {
            if count >= budget {
                break;
            }
            if items.iter().any(|i| i.asset.name == rec.name) {
                continue;
            }
            if rec.category == AssetCategory::Architecture && (arch_count >= arch_cap || !area.road_adjacent) {
                continue;
            }
            let fp = rec.footprint();
            if used + fp > limit {
                continue;
            }
            let mut copies = 1;
            if rec.category == AssetCategory::Plant && fp > 0.0 {
                let by_room = ((limit - used) / fp).floor() as usize;
                copies = self.tables.selection.max_plant_copies.min(budget - count).min(by_room).max(1);
            }
            used += fp * copies as f64;
            count += copies;
            arch_count += usize::from(rec.category == AssetCategory::Architecture);
            items.push(SelectionItem { asset: rec.clone(), count: copies });
        }
        Ok(items)
    }

    pub fn constraints(
        &self,
        area: &AreaBrief,
        selected: &[SelectedObject],
    ) -> Result<AreaConstraints, AgentError> {
        if selected.is_empty() {
            return Err(AgentError::EmptySelection(area.id.clone()));
        }
        let largest = |cat: Option<AssetCategory>, skip: Option<usize>| {
            selected
                .iter()
                .enumerate()
                .filter(|(k, o)| cat.is_none_or(|c| o.asset.category == c) && Some(*k) != skip)
                .fold(None::<(usize, f64)>, |best, (k, o)| match best {
                    Some((_, f)) if f >= o.asset.footprint() => best,
                    _ => Some((k, o.asset.footprint())),
                })
                .map(|(k, _)| k)
        };
        let anchor = largest(Some(AssetCategory::Architecture), None)
            .or_else(|| largest(None, None))
            .expect("non-empty selection");
        let second_arch = largest(Some(AssetCategory::Architecture), Some(anchor))
            .filter(|_| selected[anchor].asset.category == AssetCategory::Architecture);
        let anchor_name = selected[anchor].instance.clone();

        let mut out = AreaConstraints::new();
        let mut push = |name: &str, c: Constraint| out.entry(name.to_string()).or_default().push(c);
        let global = if area.water_adjacent || area.road_adjacent { ConstraintKind::Edge } else { ConstraintKind::Middle };
        push(&anchor_name, Constraint::global(global));

        for (k, obj) in selected.iter().enumerate() {
            if k == anchor {
                continue;
            }
            let name = obj.instance.as_str();
            match obj.asset.category {
                AssetCategory::Architecture => {
                    if Some(k) == second_arch {
                        push(name, Constraint::with(ConstraintKind::FaceTo, &anchor_name));
                    }
                    push(name, Constraint::with(ConstraintKind::Far, &anchor_name));
                }
                AssetCategory::Plant => push(name, Constraint::with(ConstraintKind::Around, &anchor_name)),
                AssetCategory::Rock => {
                    let plant = selected
                        .iter()
                        .enumerate()
                        .filter(|(j, o)| *j != k && o.asset.category == AssetCategory::Plant)
                        .min_by_key(|(j, _)| (j.abs_diff(k), *j))
                        .map(|(_, o)| o.instance.clone())
                        .unwrap_or_else(|| anchor_name.clone());
                    push(name, Constraint::with(ConstraintKind::Near, plant));
                }
                AssetCategory::Structure => push(name, Constraint::with(ConstraintKind::Near, &anchor_name)),
            }
        }
        for (k, a) in selected.iter().enumerate() {
            for (j, b) in selected.iter().enumerate() {
                if k != j && a.asset.name == b.asset.name {
                    push(&a.instance, Constraint::with(ConstraintKind::Aligned, &b.instance));
                }
            }
        }
        Ok(out)
    }
}

impl AgentBackend for RuleBackend {
    fn name(&self) -> &'static str {
        "rule"
    }

    fn interpret_prompt(&self, text: &str) -> Result<Answer<PromptInterpretation>, AgentError> {
        self.interpret(text).map(Answer::rule)
    }

    fn select_assets(
        &self,
        lib: &AssetLibrary,
        area: &AreaBrief,
        themes: &[Theme],
    ) -> Result<Answer<Vec<SelectionItem>>, AgentError> {
        self.select(lib, area, themes).map(Answer::rule)
    }

    fn generate_constraints(
        &self,
        area: &AreaBrief,
        selected: &[SelectedObject],
        _themes: &[Theme],
    ) -> Result<Answer<AreaConstraints>, AgentError> {
        self.constraints(area, selected).map(Answer::rule)
    }
}
