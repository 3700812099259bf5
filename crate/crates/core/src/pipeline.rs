//! End-to-end generation: prompt, terrain, roads, areas, then per-area
//! selection, constraints and layout.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::agents::{
    expand_instances, AgentBackend, AgentError, AnswerSource, AreaBrief, PromptInterpretation, SelectedObject, Theme,
};
use crate::area::{segment, Area, AreaError};
use crate::assets::AssetLibrary;
use crate::constraints::{check_relations, AreaConstraints, ConstraintSpec};
use crate::export::ElevationMap;
use crate::geometry::{Cell, TerrainClass, TerrainGrid};
use crate::layout::{solve_area_with, LayoutError, PlacementHints, LossParams, LossWeights, PlacedObject, SolverConfig};
use crate::road::{route, EdgeScoreWeights, RoadError, RoadParams};
use crate::scene::{Provenance, Scene, TOOL_VERSION};
use crate::terrain::{evolve_weighted, FitnessWeights, GaConfig, GridShape, TerrainError, TerrainParams, WaterFitnessConfig};

pub const DEFAULT_AREA_WORKERS: usize = 4;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Road(#[from] RoadError),
    #[error(transparent)]
    Area(#[from] AreaError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("unknown area {0:?}")]
    UnknownArea(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: TerrainGrid::DEFAULT_WIDTH,
            height: TerrainGrid::DEFAULT_HEIGHT,
            cell_size: TerrainGrid::DEFAULT_CELL_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub grid: GridConfig,
    pub ga: GaConfig,
    pub water: WaterFitnessConfig,
    pub fitness: FitnessWeights,
    pub road_weights: EdgeScoreWeights,
    pub loss_params: LossParams,
    pub loss_weights: LossWeights,
    pub solver: SolverConfig,
    /// Keeps each area's anchor object within this distance of a road when
    /// the area allows it.
    pub anchor_road_radius: Option<f64>,
    pub area_workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            ga: GaConfig::default(),
            water: WaterFitnessConfig::default(),
            fitness: FitnessWeights::default(),
            road_weights: EdgeScoreWeights::default(),
            loss_params: LossParams::default(),
            loss_weights: LossWeights::default(),
            solver: SolverConfig::default(),
            anchor_road_radius: Some(10.0),
            area_workers: DEFAULT_AREA_WORKERS,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let g = &self.grid;
        if g.width < 2 || g.height < 2 || !(g.cell_size > 0.0) {
            return Err(PipelineError::InvalidConfig("grid must be at least 2x2 with a positive cell size".into()));
        }
        if self.area_workers == 0 {
            return Err(PipelineError::InvalidConfig("area_workers must be at least 1".into()));
        }
        self.ga.validate()?;
        self.water.validate()?;
        self.loss_params.validate()?;
        self.loss_weights.validate()?;
        self.solver.validate()?;
        Ok(())
    }
}

/// Parameter overrides applied on top of the prompt interpretation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    pub terrain: Option<TerrainParams>,
    pub roads: Option<RoadParams>,
    pub themes: Option<Vec<Theme>>,
    /// Cells repainted on top of the evolved terrain, applied in order.
    pub cells: Vec<CellPaint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellPaint {
    pub x: usize,
    pub y: usize,
    pub class: TerrainClass,
}

/// Independent seed for one pipeline stage.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for b in stage.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^ (h >> 33)
}

struct AreaOutcome {
    placements: Vec<PlacedObject>,
    constraints: AreaConstraints,
    sources: Vec<(String, AnswerSource)>,
    warnings: Vec<String>,
}

fn process_area(
    backend: &dyn AgentBackend,
    lib: &AssetLibrary,
    grid: &TerrainGrid,
    area: &Area,
    rank: usize,
    themes: &[Theme],
    cfg: &PipelineConfig,
    hints: &PlacementHints,
) -> Result<AreaOutcome, PipelineError> {
    let brief = AreaBrief::new(area, grid, rank);
    let mut out = AreaOutcome { placements: vec![], constraints: AreaConstraints::new(), sources: vec![], warnings: vec![] };
    let selection = backend.select_assets(lib, &brief, themes)?;
    out.sources.push((format!("select:{}", area.id), selection.source));
    out.warnings.extend(selection.warnings.into_iter().map(|w| format!("{}: {w}", area.id)));
    let selected = expand_instances(&selection.value);
    if selected.is_empty() {
        out.warnings.push(format!("{}: nothing selected; area left empty", area.id));
        return Ok(out);
    }

    let mut attempt = selected;
    for round in 0..2 {
        let cons = backend.generate_constraints(&brief, &attempt, themes)?;
        out.sources.push((format!("constraints:{}", area.id), cons.source));
        out.warnings.extend(cons.warnings.into_iter().map(|w| format!("{}: {w}", area.id)));
        let names: Vec<String> = attempt.iter().map(|o| o.instance.clone()).collect();
        if let Err(e) = check_relations(&cons.value, &names) {
            return Err(PipelineError::InvalidConfig(format!("{}: {e}", area.id)));
        }
        match solve_area_with(area, &attempt, &cons.value, &cfg.solver, &cfg.loss_weights, &cfg.loss_params, hints) {
            Ok(s) => {
                out.placements = s.placements;
                out.constraints = cons.value;
                return Ok(out);
            }
            Err(LayoutError::NoValidPlacement { placed, .. }) => {
                let next = attempt.len() / 2;
                if round == 0 && next > 0 {
                    out.warnings.push(format!(
                        "{}: no valid placement for {} objects (deepest partial {}); retrying with {next}",
                        area.id,
                        attempt.len(),
                        placed.len()
                    ));
                    attempt.truncate(next);
                } else {
                    out.warnings.push(format!("{}: no valid placement; area left empty", area.id));
                    return Ok(out);
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn run_areas(
    backend: &dyn AgentBackend,
    lib: &AssetLibrary,
    grid: &TerrainGrid,
    areas: &[Area],
    themes: &[Theme],
    cfg: &PipelineConfig,
    hints: &PlacementHints,
) -> Result<Vec<AreaOutcome>, PipelineError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.area_workers)
        .build()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    pool.install(|| {
        areas
            .par_iter()
            .enumerate()
            .map(|(k, a)| process_area(backend, lib, grid, a, k, themes, cfg, hints))
            .collect()
    })
}

fn backend_label(backend: &dyn AgentBackend, stages: &BTreeMap<String, AnswerSource>) -> String {
    if stages.values().any(|s| *s == AnswerSource::Fallback) {
        "fallback".into()
    } else {
        backend.name().into()
    }
}

/// Sets each placement's z to the ground elevation under its center.
pub fn assign_elevations(placements: &mut [PlacedObject], grid: &TerrainGrid, seed: u64) {
    let elev = ElevationMap::from_grid(grid, seed);
    for p in placements {
        p.pose.z = elev.sample(p.pose.x, p.pose.y);
    }
}

/// Runs every stage from terrain onward for a fixed interpretation.
fn build(
    prompt: &str,
    seed: u64,
    interp: PromptInterpretation,
    paint: &[CellPaint],
    mut stages: BTreeMap<String, AnswerSource>,
    mut warnings: Vec<String>,
    backend: &dyn AgentBackend,
    lib: &AssetLibrary,
    cfg: &PipelineConfig,
) -> Result<Scene, PipelineError> {
    let shape = GridShape { width: cfg.grid.width, height: cfg.grid.height, cell_size: cfg.grid.cell_size };
    let ga = GaConfig { seed: stage_seed(seed, "terrain"), ..cfg.ga };
    let terrain = evolve_weighted(&interp.terrain, &ga, &cfg.water, &cfg.fitness, shape)?;
    if terrain.repaired {
        warnings.push("terrain: best individual needed connectivity repair".into());
    }
    let mut grid = terrain.grid;
    for c in paint {
        grid.set(Cell::new(c.x, c.y), c.class);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, "roads"));
    let roads = route(&grid, &interp.roads, &cfg.road_weights, &mut rng)?;
    let areas = segment(&grid, &roads)?;

    let hints = PlacementHints { attractors: roads.splines.clone(), anchor_radius: cfg.anchor_road_radius };
    let outcomes = run_areas(backend, lib, &grid, &areas, &interp.themes, cfg, &hints)?;
    let mut placements = Vec::new();
    let mut constraints = ConstraintSpec::default();
    for (area, o) in areas.iter().zip(outcomes) {
        stages.extend(o.sources);
        warnings.extend(o.warnings);
        if !o.constraints.is_empty() {
            constraints.0.insert(area.id.clone(), o.constraints);
        }
        placements.extend(o.placements);
    }
    assign_elevations(&mut placements, &grid, seed);

    let provenance = Provenance {
        prompt: prompt.to_string(),
        seed,
        backend: backend_label(backend, &stages),
        stages,
        parameters: json!({
            "config": cfg,
            "terrain": interp.terrain,
            "roads": interp.roads,
            "themes": interp.themes,
            "cells": paint,
        }),
        tool_version: TOOL_VERSION.to_string(),
        warnings,
    };
    Ok(Scene { revision: 1, terrain: grid, roads, areas, constraints, placements, provenance })
}

pub fn generate(
    prompt: &str,
    seed: u64,
    backend: &dyn AgentBackend,
    lib: &AssetLibrary,
    cfg: &PipelineConfig,
) -> Result<Scene, PipelineError> {
    generate_with(prompt, seed, backend, lib, cfg, &Overrides::default())
}

pub fn generate_with(
    prompt: &str,
    seed: u64,
    backend: &dyn AgentBackend,
    lib: &AssetLibrary,
    cfg: &PipelineConfig,
    overrides: &Overrides,
) -> Result<Scene, PipelineError> {
    cfg.validate()?;
    if lib.is_empty() {
        return Err(AgentError::EmptyLibrary.into());
    }
    let answer = backend.interpret_prompt(prompt)?;
    let stages = BTreeMap::from([("interpret".to_string(), answer.source)]);
    let warnings: Vec<String> = answer.warnings.into_iter().map(|w| format!("interpret: {w}")).collect();
    let mut interp = answer.value;
    if let Some(t) = overrides.terrain {
        t.validate()?;
        interp.terrain = t;
    }
    if let Some(r) = overrides.roads {
        r.validate(cfg.grid.cell_size)?;
        interp.roads = r;
    }
    if let Some(t) = &overrides.themes {
        interp.themes = t.clone();
    }
    for c in &overrides.cells {
        if c.x >= cfg.grid.width || c.y >= cfg.grid.height {
            return Err(PipelineError::InvalidConfig(format!("painted cell ({}, {}) is outside the grid", c.x, c.y)));
        }
    }
    build(prompt, seed, interp, &overrides.cells, stages, warnings, backend, lib, cfg)
}

/// Re-solves one area of an existing scene with its current objects, using
/// `constraints` when given and the scene's stored constraints otherwise.
pub fn resolve_area(
    scene: &mut Scene,
    area_id: &str,
    constraints: Option<AreaConstraints>,
    cfg: &PipelineConfig,
) -> Result<(), PipelineError> {
    let area = scene.area(area_id).cloned().ok_or_else(|| PipelineError::UnknownArea(area_id.to_string()))?;
    let selected: Vec<SelectedObject> = scene
        .placements
        .iter()
        .filter(|p| p.area == area_id)
        .map(|p| SelectedObject { instance: p.instance.clone(), asset: p.asset.clone() })
        .collect();
    let cons = constraints.unwrap_or_else(|| scene.constraints.area(area_id).cloned().unwrap_or_default());
    let names: Vec<String> = selected.iter().map(|o| o.instance.clone()).collect();
    check_relations(&cons, &names).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    let hints = PlacementHints { attractors: scene.roads.splines.clone(), anchor_radius: cfg.anchor_road_radius };
    let mut solved =
        solve_area_with(&area, &selected, &cons, &cfg.solver, &cfg.loss_weights, &cfg.loss_params, &hints)?.placements;
    assign_elevations(&mut solved, &scene.terrain, scene.provenance.seed);
    let mut solved = solved.into_iter();
    for p in scene.placements.iter_mut().filter(|p| p.area == area_id) {
        *p = solved.next().expect("one placement per object");
    }
    if cons.is_empty() {
        scene.constraints.0.remove(area_id);
    } else {
        scene.constraints.0.insert(area_id.to_string(), cons);
    }
    Ok(())
}
