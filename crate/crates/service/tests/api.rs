mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use dxengine_service::api::{self, router, AppState};
use dxengine_service::{AppConfig, ServiceError, Snapshot};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn app() -> (tempfile::TempDir, Arc<AppState>, Router) {
    let (dir, config) = common::mini_copy();
    let state = Arc::new(AppState::from_config_path(&config).unwrap());
    let app = router(state.clone());
    (dir, state, app)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Option<String>, String) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let hash = resp
        .headers()
        .get("x-case-hash")
        .map(|v| v.to_str().unwrap().to_string());
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    (status, hash, String::from_utf8(body.to_vec()).unwrap())
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(content_type: &str, body: &str) -> Request<Body> {
    Request::post("/api/diagnose")
        .header("content-type", content_type)
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[tokio::test]
async fn health_reports_fingerprint() {
    let (_d, state, app) = app();
    let (status, _, body) = send(&app, get("/api/health")).await;
    assert_eq!(status, StatusCode::OK);
    let v = json(&body);
    assert_eq!(v["fingerprint"], state.snapshot().fingerprint.as_str());
    assert_eq!(v["links"], 80);
}

#[tokio::test]
async fn finding_suggestions_and_concepts() {
    let (_d, _s, app) = app();
    let (status, _, body) = send(&app, get("/api/findings?q=ches")).await;
    assert_eq!(status, StatusCode::OK);
    let hits = json(&body);
    let hits = hits.as_array().unwrap();
    assert!(hits
        .iter()
        .all(|h| h["phrase"].as_str().unwrap().split(' ').any(|w| w.starts_with("ches"))));
    assert!(hits.iter().any(|h| h["phrase"] == "chest pain" && h["id"] == 100));

    let (status, _, body) = send(&app, get("/api/concepts/100")).await;
    assert_eq!(status, StatusCode::OK);
    let c = json(&body);
    assert_eq!(c["term"], "Chest pain");
    assert_eq!(c["root_class"], "finding");

    let (status, _, body) = send(&app, get("/api/concepts/424242")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json(&body)["code"], "not_found");
    let (status, _, _) = send(&app, get("/api/concepts/abc")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn three_encodings_agree_on_evidence() {
    let (_d, _s, app) = app();
    let bodies = [
        ("application/json", r#"{"positive": [100, 118, 120], "negative": [101]}"#.to_string()),
        (
            "application/xml",
            "<case><text>Chest pain, tachycardia and ST elevation. No fever.</text></case>".to_string(),
        ),
        ("text/plain; charset=utf-8", "Chest pain, tachycardia and ST elevation. No fever.".to_string()),
    ];
    let mut differentials = Vec::new();
    for (ct, body) in &bodies {
        let (status, hash, out) = send(&app, post(ct, body)).await;
        assert_eq!(status, StatusCode::OK, "{out}");
        assert!(hash.is_some());
        let v = json(&out);
        assert_eq!(v["evidence"]["positive"], json("[100, 118, 120]"));
        assert_eq!(v["evidence"]["negative"], json("[101]"));
        assert_eq!(v["differential"][0]["disorder_id"], 60);
        differentials.push(v["differential"].clone());
    }
    assert!(differentials.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn conflicts_and_bad_inputs() {
    let (_d, _s, app) = app();
    let (status, _, body) = send(&app, post("text/plain", "Fever. No fever.")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = json(&body);
    assert_eq!(v["code"], "conflict");
    assert_eq!(v["detail"]["finding"], 101);

    let (status, _, body) = send(&app, post("application/json", r#"{"positive": [101], "negative": [101]}"#)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json(&body)["code"], "conflict");

    let (status, _, body) = send(&app, post("application/json", r#"{"positive": [99999]}"#)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json(&body)["code"], "unknown_finding");

    let (status, _, body) = send(&app, post("application/xml", "<case><text>fever</case>")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["code"], "malformed_xml");

    let (status, _, body) = send(&app, post("application/json", r#"{"positive": [101], "extra": 1}"#)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["code"], "bad_request");

    let (status, _, body) = send(&app, post("image/png", "x")).await;
    assert_eq!(status, StatusCode::UNSUPPORTED_MEDIA_TYPE);
    let v = json(&body);
    assert_eq!(v["code"], "unsupported_media_type");
    assert!(v["message"].is_string());
}

#[tokio::test]
async fn stored_case_replays_byte_for_byte() {
    let (_d, _s, app) = app();
    let (_, hash, first) = send(&app, post("text/plain", "Cough, hemoptysis and weight loss.")).await;
    let hash = hash.unwrap();
    assert_eq!(hash.len(), 64);
    let (status, _, replay) = send(&app, get(&format!("/api/cases/{hash}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(replay, first);
    let (status, _, _) = send(&app, get(&format!("/api/cases/{}", "0".repeat(64)))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = send(&app, get("/api/cases/..%2Fconfig.toml")).await;
    assert_ne!(status, StatusCode::OK);
}

#[tokio::test]
async fn concurrent_requests_are_consistent() {
    let (_d, _s, app) = app();
    let cases = common::mini_cases();
    let mut tasks = Vec::new();
    for i in 0..32 {
        let slot = i % cases.len();
        let path = cases[slot].clone();
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let body = std::fs::read_to_string(&path).unwrap();
            let (status, _, out) = send(&app, post(common::content_type(&path), &body)).await;
            (slot, status, out)
        }));
    }
    let mut seen: std::collections::BTreeMap<usize, String> = Default::default();
    for t in tasks {
        let (i, status, out) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        if let Some(prev) = seen.insert(i, out.clone()) {
            assert_eq!(prev, out);
        }
    }
}

#[tokio::test]
async fn reload_swaps_atomically() {
    let (dir, config) = common::mini_copy();
    let old = Snapshot::build(&AppConfig::load(&config).unwrap()).unwrap();
    std::fs::write(dir.path().join("alt.toml"), common::mini_config(0.02)).unwrap();
    let new = Snapshot::build(&AppConfig::load(dir.path().join("alt.toml")).unwrap()).unwrap();
    assert_ne!(old.fingerprint, new.fingerprint);
    let expected = |fp: &str, body: &str| {
        let probe = if fp == old.fingerprint { &old } else { &new };
        let input = dxengine_service::CaseInput::Json(body.to_string());
        dxengine_service::diagnose_to_json(probe, &input).unwrap()
    };

    let state = Arc::new(AppState::from_config_path(&config).unwrap());
    let app = router(state.clone());
    let body = r#"{"positive": [102, 104, 117], "negative": [101]}"#;
    let mut tasks = Vec::new();
    for _ in 0..24 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move { send(&app, post("application/json", body)).await }));
    }
    std::fs::write(&config, common::mini_config(0.02)).unwrap();
    let (status, _, reload) = send(&app, Request::post("/api/reload").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let r = json(&reload);
    assert_eq!(r["previous"], old.fingerprint.as_str());
    assert_eq!(r["fingerprint"], new.fingerprint.as_str());
    for _ in 0..24 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move { send(&app, post("application/json", body)).await }));
    }
    for t in tasks {
        let (status, _, out) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        let fp = json(&out)["fingerprint"].as_str().unwrap().to_string();
        assert!(fp == old.fingerprint || fp == new.fingerprint);
        assert_eq!(out, expected(&fp, body), "response mixes builds");
    }
    assert_eq!(state.snapshot().fingerprint, new.fingerprint);

    std::fs::write(&config, "not toml [").unwrap();
    let (status, _, body) = send(&app, Request::post("/api/reload").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR, "{body}");
    assert_eq!(state.snapshot().fingerprint, new.fingerprint);
}

#[tokio::test]
async fn busy_port_is_reported() {
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port();
    match api::bind(port).await {
        Err(ServiceError::Bind { message, .. }) => assert_eq!(message, "port already in use"),
        other => panic!("expected bind error, got {:?}", other.map(|_| ())),
    }
}
