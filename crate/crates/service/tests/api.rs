use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use garden_core::assets::AssetLibrary;
use garden_core::export::{load_scene, scene_json};
use garden_core::geometry::TerrainClass;
use garden_core::scene::Scene;
use garden_service::api::{router, AppState};
use garden_service::{ServiceConfig, WorkspaceStore};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

fn app() -> (tempfile::TempDir, Router, Arc<AppState>) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ServiceConfig::default();
    cfg.pipeline.ga.population_size = 16;
    cfg.pipeline.ga.generations = 15;
    let state = AppState::new(WorkspaceStore::open(dir.path()).unwrap(), AssetLibrary::bundled(), cfg);
    (dir, router(state.clone()), state)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>, if_match: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(m) = if_match {
        req = req.header(header::IF_MATCH, m);
    }
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

async fn generated(app: &Router, seed: u64) -> (String, Value) {
    let r = call(app, Method::POST, "/api/generate", Some(json!({"prompt": "a garden with a pond", "seed": seed})), None).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.body));
    let v = r.json();
    (v["scene_id"].as_str().unwrap().to_string(), v)
}

fn assert_error(r: &Reply, status: StatusCode, code: &str) {
    assert_eq!(r.status, status, "{}", String::from_utf8_lossy(&r.body));
    let v = r.json();
    assert_eq!(v["error"]["code"], code);
    assert!(v["error"]["message"].as_str().is_some_and(|m| !m.is_empty()));
}

#[tokio::test]
async fn health_and_assets() {
    let (_d, app, _) = app();
    let r = call(&app, Method::GET, "/api/health", None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["status"], "ok");
    let r = call(&app, Method::GET, "/api/assets", None, None).await;
    let v = r.json();
    assert_eq!(v["count"].as_u64().unwrap() as usize, AssetLibrary::bundled().len());
    assert_eq!(v["assets"].as_array().unwrap().len(), AssetLibrary::bundled().len());
}

#[tokio::test]
async fn generate_then_get_is_identical() {
    let (dir, app, _) = app();
    let (id, created) = generated(&app, 42).await;
    assert_eq!(id.len(), 32);
    assert!(id.bytes().all(|b| b.is_ascii_hexdigit()));
    assert_eq!(created["revision"], 1);
    assert!(created["metrics"]["fractal_dim"].is_number());

    let r = call(&app, Method::GET, &format!("/api/scenes/{id}"), None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers[header::ETAG], "\"1\"");
    assert_eq!(r.json(), created["scene"]);
    let again = call(&app, Method::GET, &format!("/api/scenes/{id}"), None, None).await;
    assert_eq!(r.body, again.body);
    let on_disk = std::fs::read(dir.path().join(&id).join("scene.json")).unwrap();
    assert_eq!(r.body, on_disk);
    for f in ["layout.svg", "objects.json", "heightmap.pgm", "terrain.csv"] {
        assert!(dir.path().join(&id).join(f).is_file(), "{f}");
    }
}

#[tokio::test]
async fn error_envelopes() {
    let (_d, app, _) = app();
    let unknown = "0123456789abcdef0123456789abcdef";
    assert_error(&call(&app, Method::GET, &format!("/api/scenes/{unknown}"), None, None).await, StatusCode::NOT_FOUND, "not_found");
    assert_error(&call(&app, Method::GET, "/api/scenes/..%2F..%2Fetc", None, None).await, StatusCode::NOT_FOUND, "not_found");
    assert_error(&call(&app, Method::GET, "/api/nothing", None, None).await, StatusCode::NOT_FOUND, "not_found");
    let r = call(&app, Method::POST, "/api/generate", Some(json!({"prompt": "  "})), None).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "empty_prompt");
    assert_eq!(r.json()["error"]["locus"], "prompt");
    let r = call(&app, Method::POST, "/api/generate", Some(json!({"seed": 1})), None).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "invalid_request");
    let r = call(&app, Method::POST, "/api/generate", Some(json!({"prompt": "x", "config": {"grid": {"width": 0}}})), None).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "invalid_request");
    assert_eq!(r.json()["error"]["locus"], "config");
}

#[tokio::test]
async fn per_request_config_patch() {
    let (_d, app, _) = app();
    let body = json!({"prompt": "a pond", "seed": 3, "config": {"grid": {"width": 12, "height": 10}}});
    let r = call(&app, Method::POST, "/api/generate", Some(body), None).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let scene: Scene = serde_json::from_value(r.json()["scene"].clone()).unwrap();
    assert_eq!((scene.terrain.width(), scene.terrain.height()), (12, 10));
}

#[tokio::test]
async fn patch_flags_overlap_and_bumps_revision() {
    let (_d, app, _) = app();
    let (id, created) = generated(&app, 7).await;
    let scene: Scene = serde_json::from_value(created["scene"].clone()).unwrap();
    assert!(scene.placements.len() >= 2);
    let (a, b) = (&scene.placements[0], &scene.placements[1]);
    let key = a.qualified_name().replace('/', "%2F").replace(' ', "%20").replace('#', "%23");
    let uri = format!("/api/scenes/{id}/objects/{key}");

    let r = call(&app, Method::PATCH, &uri, Some(json!({"x": b.pose.x, "y": b.pose.y})), None).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let v = r.json();
    assert_eq!(v["revision"], 2);
    assert_eq!(v["placement"]["pose"]["x"], b.pose.x);
    let overlap = v["hard_violations"]
        .as_array()
        .unwrap()
        .iter()
        .find(|h| h["kind"] == "overlap")
        .expect("overlap flagged")
        .clone();
    let pair = [overlap["a"].as_str().unwrap(), overlap["b"].as_str().unwrap()];
    assert!(pair.contains(&a.qualified_name().as_str()) && pair.contains(&b.qualified_name().as_str()), "{overlap}");
    for l in v["losses"].as_array().unwrap() {
        assert!(l["object"] == a.instance.as_str() || l["constraint"][1] == a.instance.as_str(), "{l}");
        assert!(l["raw"].as_f64().unwrap() >= 0.0);
    }

    // The move is persisted, not silently fixed.
    let stored: Value = call(&app, Method::GET, &format!("/api/scenes/{id}"), None, None).await.json();
    assert_eq!(stored["revision"], 2);
    assert_eq!(stored["placements"][0]["pose"]["x"], b.pose.x);

    // Index addressing and rotation.
    let r = call(&app, Method::PATCH, &format!("/api/scenes/{id}/objects/0"), Some(json!({"rotation": 90})), Some("\"2\"")).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["placement"]["pose"]["rotation"], 90);
    assert_eq!(r.headers[header::ETAG], "\"3\"");

    let r = call(&app, Method::PATCH, &format!("/api/scenes/{id}/objects/0"), Some(json!({"rotation": 45})), None).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "invalid_request");
    assert_eq!(r.json()["error"]["locus"], "rotation");
    let r = call(&app, Method::PATCH, &format!("/api/scenes/{id}/objects/no%20such"), Some(json!({"x": 1.0})), None).await;
    assert_error(&r, StatusCode::NOT_FOUND, "not_found");
}

#[tokio::test]
async fn stale_revision_conflicts() {
    let (_d, app, _) = app();
    let (id, _) = generated(&app, 9).await;
    let uri = format!("/api/scenes/{id}/objects/0");
    let r = call(&app, Method::PATCH, &uri, Some(json!({"x": 15.0})), Some("\"1\"")).await;
    assert_eq!(r.status, StatusCode::OK);
    let r = call(&app, Method::PATCH, &uri, Some(json!({"x": 16.0})), Some("\"1\"")).await;
    assert_error(&r, StatusCode::CONFLICT, "revision_conflict");
    let stored: Value = call(&app, Method::GET, &format!("/api/scenes/{id}"), None, None).await.json();
    assert_eq!(stored["revision"], 2);
    assert_eq!(stored["placements"][0]["pose"]["x"], 15.0);
}

#[tokio::test]
async fn resolve_area_touches_only_that_area() {
    let (_d, app, _) = app();
    let (id, created) = generated(&app, 5).await;
    let before: Scene = serde_json::from_value(created["scene"].clone()).unwrap();
    let target = before.placements[0].area.clone();
    let uri = format!("/api/scenes/{id}/objects/0");
    call(&app, Method::PATCH, &uri, Some(json!({"x": before.placements[0].pose.x + 1.0})), None).await;

    let r = call(&app, Method::POST, &format!("/api/scenes/{id}/areas/{target}/layout"), None, None).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let v = r.json();
    assert_eq!(v["revision"], 3);
    let after: Scene = serde_json::from_value(v["scene"].clone()).unwrap();
    assert_eq!(after.placements[0], before.placements[0], "re-solve restores the solver's optimum");
    for (x, y) in before.placements.iter().zip(&after.placements) {
        if x.area != target {
            assert_eq!(x, y);
        }
    }
    let r = call(&app, Method::POST, &format!("/api/scenes/{id}/areas/area-999/layout"), None, None).await;
    assert_error(&r, StatusCode::NOT_FOUND, "not_found");

    // Custom constraints replace the stored ones for that area.
    let inst = &before.placements[0].instance;
    let body = json!({"constraints": {inst.clone(): [["edge", "Global"]]}});
    let r = call(&app, Method::POST, &format!("/api/scenes/{id}/areas/{target}/layout"), Some(body), None).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let after: Scene = serde_json::from_value(r.json()["scene"].clone()).unwrap();
    assert_eq!(after.constraints.area(&target).unwrap().len(), 1);
    let bad = json!({"constraints": {inst.clone(): [["near", "ghost", "Distance"]]}});
    let r = call(&app, Method::POST, &format!("/api/scenes/{id}/areas/{target}/layout"), Some(bad), None).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "invalid_config");
}

#[tokio::test]
async fn terrain_overrides_regenerate_downstream() {
    let (_d, app, _) = app();
    let (id, created) = generated(&app, 11).await;
    let before: Scene = serde_json::from_value(created["scene"].clone()).unwrap();

    let body = json!({"cells": [{"x": 0, "y": 0, "class": 0}, {"x": 5, "y": 5, "class": 1}]});
    let r = call(&app, Method::POST, &format!("/api/scenes/{id}/terrain"), Some(body), Some("\"1\"")).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let v = r.json();
    assert_eq!(v["revision"], 2);
    let after: Scene = serde_json::from_value(v["scene"].clone()).unwrap();
    assert_eq!(after.terrain.cells()[0], TerrainClass::Outside);
    assert_eq!(after.terrain.get(garden_core::geometry::Cell::new(5, 5)), TerrainClass::Waterbody);
    assert_eq!(after.provenance.seed, before.provenance.seed);
    assert!(after.hard_violations().is_empty());

    // A later override keeps the earlier paint.
    let body = json!({"roads": {"num_keypoints": 2}});
    let r = call(&app, Method::POST, &format!("/api/scenes/{id}/terrain"), Some(body), None).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let after: Scene = serde_json::from_value(r.json()["scene"].clone()).unwrap();
    assert_eq!(after.terrain.get(garden_core::geometry::Cell::new(5, 5)), TerrainClass::Waterbody);
    assert_eq!(after.provenance.parameters["roads"]["num_keypoints"], 2);

    let body = json!({"terrain": {"waterbody": {"coverage": 7.0}}});
    let r = call(&app, Method::POST, &format!("/api/scenes/{id}/terrain"), Some(body), None).await;
    assert!(r.status.is_client_error(), "{}", r.status);
    let body = json!({"cells": [{"x": 500, "y": 0, "class": 0}]});
    let r = call(&app, Method::POST, &format!("/api/scenes/{id}/terrain"), Some(body), None).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "invalid_config");
}

#[tokio::test]
async fn export_formats_and_media_types() {
    let (dir, app, _) = app();
    let (id, _) = generated(&app, 13).await;
    let scene = load_scene(&dir.path().join(&id).join("scene.json")).unwrap();
    for (fmt, media, file) in [
        ("svg", "image/svg+xml", "layout.svg"),
        ("objects", "application/json", "objects.json"),
        ("heightmap", "image/x-portable-graymap", "heightmap.pgm"),
        ("terrain", "text/csv", "terrain.csv"),
    ] {
        let r = call(&app, Method::GET, &format!("/api/scenes/{id}/export?format={fmt}"), None, None).await;
        assert_eq!(r.status, StatusCode::OK);
        assert_eq!(r.headers[header::CONTENT_TYPE], media);
        assert_eq!(r.body, std::fs::read(dir.path().join(&id).join(file)).unwrap(), "{fmt}");
    }
    let objects: Value = serde_json::from_slice(
        &call(&app, Method::GET, &format!("/api/scenes/{id}/export?format=objects"), None, None).await.body,
    )
    .unwrap();
    assert_eq!(objects.as_array().unwrap().len(), scene.placements.len());
    let r = call(&app, Method::GET, &format!("/api/scenes/{id}/export?format=scene"), None, None).await;
    assert_eq!(String::from_utf8(r.body).unwrap(), scene_json(&scene));
    let r = call(&app, Method::GET, &format!("/api/scenes/{id}/export?format=obj"), None, None).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "invalid_request");
}

#[tokio::test]
async fn concurrent_patches_are_serialized() {
    let (_d, app, _) = app();
    let (id, _) = generated(&app, 17).await;
    let mut tasks = Vec::new();
    for k in 0..8 {
        let app = app.clone();
        let uri = format!("/api/scenes/{id}/objects/0");
        tasks.push(tokio::spawn(async move {
            call(&app, Method::PATCH, &uri, Some(json!({"x": 20.0 + k as f64})), None).await.json()["revision"]
                .as_u64()
                .unwrap()
        }));
    }
    let mut revs = Vec::new();
    for t in tasks {
        revs.push(t.await.unwrap());
    }
    revs.sort();
    assert_eq!(revs, (2..10).collect::<Vec<u64>>());
    let stored: Value = call(&app, Method::GET, &format!("/api/scenes/{id}"), None, None).await.json();
    assert_eq!(stored["revision"], 9);
}
