mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use qrag::server::router;
use qrag_core::engine::load_index;
use serde_json::Value;
use tower::ServiceExt;

fn app() -> (axum::Router, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let index = common::build_index(dir.path());
    (router(Arc::new(load_index(index).unwrap())), dir)
}

fn chunk_count(dir: &tempfile::TempDir) -> usize {
    let chunks = std::fs::read_to_string(dir.path().join("index").join("chunks.jsonl")).unwrap();
    chunks.lines().count()
}

async fn call(app: axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn post(body: &str) -> Request<Body> {
    Request::post("/v1/search")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn health_reports_chunks() {
    let (app, dir) = app();
    let (status, body) = call(app, Request::get("/v1/health").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["chunks"], chunk_count(&dir));
}

#[tokio::test]
async fn search_returns_ranked_hits() {
    let (app, _dir) = app();
    let (status, body) = call(app, post(r#"{"query": "ਤਲਵੰਡੀ", "mode": "sparse_only", "k": 3}"#)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["mode"], "sparse_only");
    assert_eq!(body["hits"][0]["chunk_id"], "d1#0");
    assert_eq!(body["hits"][0]["rank"], 1);
    assert!(body["timings"]["total"].is_number());
    assert!(body["hits"].as_array().unwrap().len() <= 3);
}

#[tokio::test]
async fn default_mode_is_quantum_interference() {
    let (app, _dir) = app();
    let (status, body) = call(app, post(r#"{"query": "ਪੰਜਾਬੀ ਖਾਣਾ"}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["mode"], "quantum_interference");
    assert!(body["hits"][0]["quantum"].is_number());
    assert!(!body["context"].as_str().unwrap().is_empty());
}

#[tokio::test]
async fn errors_are_json() {
    let (app, _dir) = app();
    let cases = [
        (r#"{"query": "ਪੰਜਾਬ", "mode": "nope"}"#, StatusCode::BAD_REQUEST),
        (r#"{"query": "   "}"#, StatusCode::BAD_REQUEST),
        (r#"{"query": "ਪੰਜਾਬ", "k": 0}"#, StatusCode::BAD_REQUEST),
        (r#"{"mode": "rrf"}"#, StatusCode::UNPROCESSABLE_ENTITY),
        ("not json", StatusCode::BAD_REQUEST),
    ];
    for (body, want) in cases {
        let (status, json) = call(app.clone(), post(body)).await;
        assert_eq!(status, want, "{body}");
        assert!(json["error"].is_string(), "{json}");
    }
    let (status, json) = call(app, Request::get("/v2/x").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json["error"], "not found");
}

#[tokio::test]
async fn concurrent_requests_share_one_engine() {
    let (app, _dir) = app();
    let mut handles = Vec::new();
    for q in ["ਪੰਜਾਬ", "ਵਿਸਾਖੀ", "ਗੁਰੂ ਨਾਨਕ", "ਅੰਮ੍ਰਿਤਸਰ"] {
        let app = app.clone();
        let body = serde_json::json!({"query": q}).to_string();
        handles.push(tokio::spawn(async move { call(app, post(&body)).await }));
    }
    for h in handles {
        let (status, _) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
    }
}
