//! JSON-over-HTTP API backing the designer client.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use garden_core::agents::AgentError;
use garden_core::assets::AssetLibrary;
use garden_core::constraints::AreaConstraints;
use garden_core::export::{heightmap_pgm, layout_svg, objects_json, scene_json, terrain_csv};
use garden_core::geometry::Rotation;
use garden_core::layout::{constraint_losses, ConstraintLoss, LayoutError, PlacedObject};
use garden_core::metrics::{compute_metrics, MetricsReport, PathScoreConfig};
use garden_core::pipeline::{assign_elevations, generate_with, resolve_area, CellPaint, Overrides, PipelineConfig, PipelineError};
use garden_core::scene::{HardViolation, Scene, TOOL_VERSION};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{merge_patch, BackendChoice, ServiceConfig};
use crate::store::{StoreError, WorkspaceStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub locus: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code: code.into(), message: message.into(), locus: None } }
    }

    pub fn at(mut self, locus: impl Into<String>) -> Self {
        self.body.locus = Some(locus.into());
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.body }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("scene {id} not found")).at("id")
            }
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let unprocessable = |code: &str, msg: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, msg);
        match e {
            PipelineError::Agent(AgentError::EmptyPrompt) => unprocessable("empty_prompt", e.to_string()).at("prompt"),
            PipelineError::UnknownArea(ref a) => {
                ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("area {a} not found")).at("area")
            }
            PipelineError::InvalidConfig(m) => unprocessable("invalid_config", m),
            PipelineError::Layout(LayoutError::NoValidPlacement { .. }) => {
                unprocessable("no_valid_placement", e.to_string())
            }
            PipelineError::Agent(AgentError::RemoteUnavailable(_)) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "remote_unavailable", e.to_string())
            }
            other => unprocessable("generation_failed", other.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    pub store: WorkspaceStore,
    pub lib: AssetLibrary,
    pub config: ServiceConfig,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(store: WorkspaceStore, lib: AssetLibrary, config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self { store, lib, config, locks: Mutex::default() })
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks.lock().expect("lock table").entry(id.to_string()).or_default().clone()
    }

    fn metrics(&self, scene: &Scene) -> MetricsReport {
        compute_metrics(scene, self.lib.len(), &PathScoreConfig::default())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/assets", get(assets))
        .route("/api/generate", post(generate))
        .route("/api/scenes", get(list_scenes))
        .route("/api/scenes/{id}", get(get_scene))
        .route("/api/scenes/{id}/terrain", post(regenerate_terrain))
        .route("/api/scenes/{id}/areas/{aid}/layout", post(resolve_layout))
        .route("/api/scenes/{id}/objects/{key}", patch(move_object))
        .route("/api/scenes/{id}/export", get(export))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let text = if body.iter().all(u8::is_ascii_whitespace) { &b"{}"[..] } else { &body[..] };
    serde_json::from_slice(text).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

fn etag(revision: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{revision}\"")).expect("ascii")
}

/// Rejects a stale `If-Match` revision.
fn check_revision(headers: &HeaderMap, scene: &Scene) -> ApiResult<()> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(());
    };
    let text = v.to_str().unwrap_or_default().trim();
    let text = text.strip_prefix("W/").unwrap_or(text).trim_matches('"');
    if text == "*" || text.parse::<u64>().ok() == Some(scene.revision) {
        return Ok(());
    }
    Err(ApiError::new(
        StatusCode::CONFLICT,
        "revision_conflict",
        format!("scene is at revision {}, request expected {text}", scene.revision),
    )
    .at("If-Match"))
}

#[derive(Serialize)]
struct SceneResponse {
    scene_id: String,
    revision: u64,
    scene: Scene,
    metrics: MetricsReport,
}

fn scene_response(status: StatusCode, id: String, scene: Scene, metrics: MetricsReport) -> Response {
    let rev = scene.revision;
    let mut r = (status, Json(SceneResponse { scene_id: id, revision: rev, scene, metrics })).into_response();
    r.headers_mut().insert(header::ETAG, etag(rev));
    r
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "status": "ok", "version": TOOL_VERSION, "assets": st.lib.len() }))
}

async fn assets(State(st): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "count": st.lib.len(), "stats": st.lib.stats(), "assets": st.lib.records() }))
}

async fn list_scenes(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    Ok(Json(json!({ "scenes": st.store.list()? })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    prompt: String,
    seed: Option<u64>,
    #[serde(default)]
    backend: BackendChoice,
    /// Merge patch over the service's pipeline config.
    config: Option<Value>,
}

async fn generate(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: GenerateRequest = parse_body(&body)?;
    let cfg = st.config.pipeline_with(req.config.as_ref()).map_err(|e| ApiError::bad_request(e.to_string()).at("config"))?;
    let seed = req.seed.unwrap_or_else(rand::random);
    let st2 = st.clone();
    let (id, scene) = blocking(move || {
        let backend = st2.config.backend(req.backend);
        let scene = generate_with(&req.prompt, seed, backend.as_ref(), &st2.lib, &cfg, &Overrides::default())?;
        let id = st2.store.create(&scene)?;
        Ok((id, scene))
    })
    .await?;
    log::info!("generated scene {id} (seed {seed}, {} objects)", scene.placements.len());
    let metrics = st.metrics(&scene);
    Ok(scene_response(StatusCode::CREATED, id, scene, metrics))
}

async fn get_scene(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let scene = st.store.load(&id)?;
    let mut r = ([(header::CONTENT_TYPE, "application/json")], scene_json(&scene)).into_response();
    r.headers_mut().insert(header::ETAG, etag(scene.revision));
    Ok(r)
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct TerrainRequest {
    /// Merge patch over the scene's terrain parameters.
    terrain: Option<Value>,
    /// Merge patch over the scene's road parameters.
    roads: Option<Value>,
    themes: Option<Value>,
    /// Painted cells, appended to the scene's earlier paint.
    cells: Vec<CellPaint>,
    backend: Option<BackendChoice>,
}

/// The pipeline config a scene was generated with, or `fallback` for scenes
/// that do not record one.
fn scene_config(scene: &Scene, fallback: &PipelineConfig) -> PipelineConfig {
    scene
        .provenance
        .parameters
        .get("config")
        .and_then(|c| serde_json::from_value::<PipelineConfig>(c.clone()).ok())
        .unwrap_or_else(|| fallback.clone())
}

/// Overrides and config that reproduce `scene`, with `req` layered on top.
fn regeneration_inputs(scene: &Scene, req: &TerrainRequest, fallback: &PipelineConfig) -> ApiResult<(Overrides, PipelineConfig)> {
    let params = &scene.provenance.parameters;
    let mut merged = json!({
        "terrain": params.get("terrain").cloned().unwrap_or(Value::Null),
        "roads": params.get("roads").cloned().unwrap_or(Value::Null),
        "themes": params.get("themes").cloned().unwrap_or(Value::Null),
        "cells": params.get("cells").cloned().unwrap_or(json!([])),
    });
    for (key, patch) in [("terrain", &req.terrain), ("roads", &req.roads), ("themes", &req.themes)] {
        if let Some(p) = patch {
            merge_patch(&mut merged[key], p);
        }
    }
    let mut overrides: Overrides =
        serde_json::from_value(merged).map_err(|e| ApiError::bad_request(format!("invalid overrides: {e}")))?;
    overrides.cells.extend(req.cells.iter().copied());
    Ok((overrides, scene_config(scene, fallback)))
}

async fn regenerate_terrain(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let req: TerrainRequest = parse_body(&body)?;
    let lock = st.lock_for(&id);
    let _guard = lock.lock().await;
    let old = st.store.load(&id)?;
    check_revision(&headers, &old)?;
    let (overrides, cfg) = regeneration_inputs(&old, &req, &st.config.pipeline)?;
    let choice = req.backend.unwrap_or(BackendChoice::Rule);
    let st2 = st.clone();
    let id2 = id.clone();
    let scene = blocking(move || {
        let backend = st2.config.backend(choice);
        let p = &old.provenance;
        let mut scene = generate_with(&p.prompt, p.seed, backend.as_ref(), &st2.lib, &cfg, &overrides)?;
        scene.revision = old.revision + 1;
        st2.store.save(&id2, &scene)?;
        Ok(scene)
    })
    .await?;
    let metrics = st.metrics(&scene);
    Ok(scene_response(StatusCode::OK, id, scene, metrics))
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct LayoutRequest {
    constraints: Option<AreaConstraints>,
}

async fn resolve_layout(
    State(st): State<Arc<AppState>>,
    Path((id, aid)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let req: LayoutRequest = parse_body(&body)?;
    let lock = st.lock_for(&id);
    let _guard = lock.lock().await;
    let mut scene = st.store.load(&id)?;
    check_revision(&headers, &scene)?;
    let cfg = scene_config(&scene, &st.config.pipeline);
    let st2 = st.clone();
    let id2 = id.clone();
    let scene = blocking(move || {
        resolve_area(&mut scene, &aid, req.constraints, &cfg)?;
        scene.revision += 1;
        st2.store.save(&id2, &scene)?;
        Ok(scene)
    })
    .await?;
    let metrics = st.metrics(&scene);
    Ok(scene_response(StatusCode::OK, id, scene, metrics))
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct MoveRequest {
    x: Option<f64>,
    y: Option<f64>,
    rotation: Option<i64>,
}

#[derive(Serialize)]
struct MoveResponse {
    scene_id: String,
    revision: u64,
    placement: PlacedObject,
    losses: Vec<ConstraintLoss>,
    hard_violations: Vec<HardViolation>,
}

async fn move_object(
    State(st): State<Arc<AppState>>,
    Path((id, key)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let req: MoveRequest = parse_body(&body)?;
    for (name, v) in [("x", req.x), ("y", req.y)] {
        if v.is_some_and(|v| !v.is_finite()) {
            return Err(ApiError::bad_request(format!("{name} must be finite")).at(name));
        }
    }
    let rotation = req
        .rotation
        .map(|r| Rotation::try_from(r).map_err(|e| ApiError::bad_request(e.to_string()).at("rotation")))
        .transpose()?;

    let lock = st.lock_for(&id);
    let _guard = lock.lock().await;
    let mut scene = st.store.load(&id)?;
    check_revision(&headers, &scene)?;
    let idx = scene
        .placement_index(&key)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("object {key} not found")).at("object"))?;
    let p = &mut scene.placements[idx];
    p.pose.x = req.x.unwrap_or(p.pose.x);
    p.pose.y = req.y.unwrap_or(p.pose.y);
    p.pose.rotation = rotation.unwrap_or(p.pose.rotation);
    assign_elevations(std::slice::from_mut(p), &scene.terrain, scene.provenance.seed);
    scene.revision += 1;

    let placement = scene.placements[idx].clone();
    let losses = match (scene.area(&placement.area), scene.constraints.area(&placement.area)) {
        (Some(area), Some(cons)) => {
            let in_area: Vec<PlacedObject> =
                scene.placements.iter().filter(|p| p.area == placement.area).cloned().collect();
            let cfg = scene_config(&scene, &st.config.pipeline);
            constraint_losses(&in_area, cons, area, &cfg.loss_weights, &cfg.loss_params)
                .map_err(|e| ApiError::internal(e.to_string()))?
                .into_iter()
                .filter(|l| l.object == placement.instance || l.constraint.rel.as_deref() == Some(&placement.instance))
                .collect()
        }
        _ => vec![],
    };
    let hard_violations = scene.hard_violations();
    st.store.save(&id, &scene)?;
    let revision = scene.revision;
    let mut r = Json(MoveResponse { scene_id: id, revision, placement, losses, hard_violations }).into_response();
    r.headers_mut().insert(header::ETAG, etag(revision));
    Ok(r)
}

#[derive(Deserialize)]
struct ExportQuery {
    format: String,
}

async fn export(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let scene = st.store.load(&id)?;
    let (media, name, body): (&str, &str, Vec<u8>) = match q.format.as_str() {
        "svg" => ("image/svg+xml", "layout.svg", layout_svg(&scene).into_bytes()),
        "objects" => ("application/json", "objects.json", objects_json(&scene).into_bytes()),
        "heightmap" => ("image/x-portable-graymap", "heightmap.pgm", heightmap_pgm(&scene)),
        "terrain" => ("text/csv", "terrain.csv", terrain_csv(&scene.terrain).into_bytes()),
        "scene" => ("application/json", "scene.json", scene_json(&scene).into_bytes()),
        other => {
            return Err(ApiError::bad_request(format!(
                "unknown format {other:?} (expected svg, objects, heightmap, terrain or scene)"
            ))
            .at("format"))
        }
    };
    let disposition = format!("attachment; filename=\"{name}\"");
    Ok((
        [(header::CONTENT_TYPE, media.to_string()), (header::CONTENT_DISPOSITION, disposition)],
        body,
    )
        .into_response())
}
