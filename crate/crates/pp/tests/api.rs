use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use pprune_core::service::RunStore;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

fn app(root: &Path) -> axum::Router {
    pprune_cli::api::router(Arc::new(RunStore::new(root)), None)
}

#[tokio::test]
async fn unknown_run_is_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, body) = call(&app, Method::GET, "/api/runs/run-nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].is_string());
    let (status, _) = call(&app, Method::GET, "/api/runs/run-nope/ranking", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn review_walkthrough() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let config = fixtures().join("run.toml");

    let (status, run) = call(&app, Method::POST, "/api/runs", Some(json!({ "config": config }))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(run["phase"], "GatePostRanking");
    let id = run["run_id"].as_str().unwrap().to_string();

    let (status, list) = call(&app, Method::GET, "/api/runs", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);

    let (status, cats) =
        call(&app, Method::GET, &format!("/api/runs/{id}/categories?profile=DefensiveMoat"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cats["profile"], "DefensiveMoat");

    let (status, ranking) = call(&app, Method::GET, &format!("/api/runs/{id}/ranking"), None).await;
    assert_eq!(status, StatusCode::OK);
    let first = ranking["entries"][0]["patent_id"].as_str().unwrap().to_string();

    let (status, gate) = call(&app, Method::GET, &format!("/api/runs/{id}/gates/PostRanking"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(gate["gate_id"], "PostRanking");

    let (status, _) = call(&app, Method::GET, &format!("/api/runs/{id}/gates/Bogus"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let wrong = json!({ "gate_id": "PostMatch", "action": "Approve" });
    let (status, _) = call(&app, Method::POST, &format!("/api/runs/{id}/gates/PostRanking"), Some(wrong)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let amend = json!({
        "gate_id": "PostRanking",
        "reviewer": "attorney",
        "verdicts": [{ "item_id": first, "verdict": { "Regrade": 0 }, "note": "weak" }],
        "expected_version": 1
    });
    let (status, res) = call(&app, Method::POST, &format!("/api/runs/{id}/gates/PostRanking"), Some(amend)).await;
    assert_eq!(status, StatusCode::OK, "{res}");
    assert_eq!(res["gate"]["state"], "Amended");
    assert_eq!(res["run"]["phase"], "GatePostMatch");

    let again = json!({ "gate_id": "PostRanking", "action": "Approve" });
    let (status, body) = call(&app, Method::POST, &format!("/api/runs/{id}/gates/PostRanking"), Some(again)).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");

    let (status, matches) = call(&app, Method::GET, &format!("/api/runs/{id}/matches"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!matches.as_array().unwrap().is_empty());

    let (status, _) = call(&app, Method::GET, &format!("/api/runs/{id}/pruned"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    for gate in ["PostMatch", "FinalOntology"] {
        let body = json!({ "gate_id": gate, "action": "Approve", "reviewer": "attorney" });
        let (status, res) = call(&app, Method::POST, &format!("/api/runs/{id}/gates/{gate}"), Some(body)).await;
        assert_eq!(status, StatusCode::OK, "{res}");
    }
    let (_, run) = call(&app, Method::GET, &format!("/api/runs/{id}"), None).await;
    assert_eq!(run["phase"], "Complete");

    let expected: Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("expected.json")).unwrap()).unwrap();
    let (status, pruned) = call(&app, Method::GET, &format!("/api/runs/{id}/pruned"), None).await;
    assert_eq!(status, StatusCode::OK);
    let mut got: Vec<&str> = pruned["patent_ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    got.sort();
    let mut want: Vec<&str> =
        expected["planted_patent_ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    want.sort();
    assert_eq!(got, want);

    let (status, reports) = call(&app, Method::GET, &format!("/api/runs/{id}/reports"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reports[0]["target_match"]["need_id"], expected["planted_need_id"]);
}

#[tokio::test]
async fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, body) = call(&app, Method::POST, "/api/runs", Some(json!({ "config": "/no/such/run.toml" }))).await;
    assert!(status.is_client_error(), "{status} {body}");
}

#[tokio::test]
async fn serves_static_bundle() {
    let runs = tempfile::tempdir().unwrap();
    let web = tempfile::tempdir().unwrap();
    std::fs::write(web.path().join("index.html"), "<html>console</html>").unwrap();
    let app = pprune_cli::api::router(Arc::new(RunStore::new(runs.path())), Some(web.path().to_path_buf()));
    let res = app.oneshot(Request::get("/").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<html>console</html>");
}
