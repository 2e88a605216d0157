use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use threebox_serve::{commit, router, SessionManager};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn config(engine: &str, rounds: u64) -> Value {
    let mut c = json!({"engine": engine, "rounds": rounds, "context_schedule": "external", "seed": 11});
    if engine == "macroreal" {
        c["mr_strategy"] = json!({
            "placement": [0.0, 0.0, 1.0],
            "shuffle_I": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]],
            "shuffle_F": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            "measurement_disturbance": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        });
    }
    c
}

#[tokio::test]
async fn twenty_round_transcript_verifies() {
    let app = router(Arc::new(SessionManager::default()), None);
    let (status, created) = call(&app, Method::POST, "/sessions", Some(config("quantum", 20))).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    let id = created["session_id"].as_str().unwrap().to_string();
    assert_eq!(created["phase"], "AwaitingContext");

    let contexts = ["M1", "M2", "none", "M2", "M1"];
    let mut deltas = 0.0;
    let mut ledger = 0.0;
    for round in 1..=20u64 {
        let ctx = contexts[(round as usize) % contexts.len()];
        let (s, sub) =
            call(&app, Method::POST, &format!("/sessions/{id}/context"), Some(json!({"context": ctx}))).await;
        assert_eq!(s, StatusCode::OK, "{sub}");
        assert_eq!(sub["round_id"], round);
        assert_eq!(sub["phase"], "AwaitingReveal");
        assert_eq!(sub.get("bob_outcome").is_none(), ctx == "none");
        assert!(sub.get("alice_m3").is_none() && sub.get("alice_bets").is_none());
        let hash = sub["commitment_hash"].as_str().unwrap().to_string();
        assert_eq!(hash.len(), 64);

        let (s, rev) = call(&app, Method::POST, &format!("/sessions/{id}/reveal"), None).await;
        assert_eq!(s, StatusCode::OK, "{rev}");
        let salt = rev["salt"].as_str().unwrap();
        let record_json = rev["record_json"].as_str().unwrap();
        assert!(commit::verify(&hash, salt, record_json), "round {round}");
        let record: Value = serde_json::from_str(record_json).unwrap();
        assert_eq!(record, rev["record"]);
        assert_eq!(record["context"], ctx);
        assert_eq!(record["round_id"], round);
        if ctx != "none" {
            assert_eq!(record["bob_outcome"], sub["bob_outcome"]);
        }
        deltas += rev["payoff_delta"].as_f64().unwrap();
        ledger = rev["ledger"].as_f64().unwrap();
        assert_eq!(rev["phase"], if round == 20 { "Settled" } else { "AwaitingContext" });
    }
    assert_eq!(ledger, deltas);

    let (s, report) = call(&app, Method::GET, &format!("/sessions/{id}/report"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(report["ledger"].as_f64().unwrap(), deltas);
    assert_eq!(report["rounds_played"], 20);
    assert_eq!(report["history"].as_array().unwrap().len(), 20);
    assert!(report.get("report").is_some());
}

#[tokio::test]
async fn errors_are_structured() {
    let app = router(Arc::new(SessionManager::default()), None);
    let (s, e) = call(&app, Method::POST, "/sessions/deadbeef/context", Some(json!({"context": "M1"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(e["code"], "unknown_session");
    assert!(e["message"].is_string());

    let (s, e) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"engine": "macroreal", "rounds": 5, "context_schedule": "external"})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["code"], "invalid_config");

    let (s, e) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"engine": "quantum", "rounds": 5, "context_schedule": "external", "nosie": {}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(e["message"].as_str().unwrap().contains("nosie"));

    let (s, e) = call(&app, Method::POST, "/sessions", None).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_config")));

    let (_, created) = call(&app, Method::POST, "/sessions", Some(config("quantum", 3))).await;
    let id = created["session_id"].as_str().unwrap();
    let (s, e) = call(&app, Method::POST, &format!("/sessions/{id}/reveal"), None).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::CONFLICT, Some("wrong_phase")));
    let (s, e) = call(&app, Method::POST, &format!("/sessions/{id}/context"), Some(json!({"context": "M3"}))).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_request")));
}

#[tokio::test]
async fn default_config_backs_empty_create() {
    let cfg = threebox::SessionConfig::quantum(threebox::NoiseParams::ideal(), 4, 1)
        .with_schedule(threebox::ContextSchedule::External);
    let app = router(Arc::new(SessionManager::default()), Some(cfg));
    let (s, created) = call(&app, Method::POST, "/sessions", None).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(created["rounds_total"], 4);
    assert_eq!(created["engine"], "quantum");
}

#[tokio::test]
async fn macrorealist_sessions_reveal_ground_truth() {
    let app = router(Arc::new(SessionManager::default()), None);
    let (s, created) = call(&app, Method::POST, "/sessions", Some(config("macroreal", 2))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "rows must be distributions: {created}");
    let mut cfg = config("macroreal", 2);
    cfg["mr_strategy"]["shuffle_I"] = json!([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let (_, created) = call(&app, Method::POST, "/sessions", Some(cfg)).await;
    let id = created["session_id"].as_str().unwrap();
    call(&app, Method::POST, &format!("/sessions/{id}/context"), Some(json!({"context": "M1"}))).await;
    let (_, rev) = call(&app, Method::POST, &format!("/sessions/{id}/reveal"), None).await;
    assert_eq!(rev["record"]["ground_truth_boxes"], json!([3, 3, 3]));
}
