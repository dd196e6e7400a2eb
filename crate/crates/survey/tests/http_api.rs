mod common;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use common::shared;
use cvm_survey::http::{router, serve};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tower::ServiceExt;

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value, String) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let json = serde_json::from_str(&text).unwrap_or(Value::Null);
    (status, json, text)
}

fn post(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

#[tokio::test]
async fn full_session_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(shared(dir.path(), 4));

    let (status, created, _) = call(&app, post("/sessions", json!({}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["session_id"].as_str().unwrap().to_owned();
    assert_eq!(created["phase"], "intro");
    assert_eq!(created["seq"], 0);
    assert_eq!(created["intro"].as_array().unwrap().len(), 3);

    let (status, again, _) = call(&app, get(&format!("/sessions/{id}/question"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, created);

    // answer every question with its first offered option until done
    let mut q = created;
    let mut steps = 0;
    loop {
        let answer = match q["options"].as_array() {
            Some(opts) => opts[0]["answer"].clone(),
            None => json!({ "type": "value", "value": q["min"] }),
        };
        let (status, receipt, text) = call(
            &app,
            post(
                &format!("/sessions/{id}/answer"),
                json!({ "seq": q["seq"], "answer": answer }),
            ),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{text}");
        steps += 1;
        if receipt["phase"] == "done" {
            assert!(receipt["outcome"].is_string());
            break;
        }
        q = receipt["next"].clone();
        if q["phase"] == "bid1" {
            assert!(q["prompt"]
                .as_str()
                .unwrap()
                .contains(&format!("KRW {}", q["bid"].as_u64().unwrap() / 1000)));
        }
    }
    assert!(steps > 8);

    let (status, err, _) = call(&app, get(&format!("/sessions/{id}/question"))).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(err["error"], "done");
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(shared(dir.path(), 4));
    let (_, created, _) = call(&app, post("/sessions", json!({}))).await;
    let id = created["session_id"].as_str().unwrap();
    let answer_uri = format!("/sessions/{id}/answer");

    let (status, body, _) = call(&app, get("/sessions/missing/question")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");

    let (status, body, _) = call(
        &app,
        post(
            &answer_uri,
            json!({ "seq": 0, "answer": { "type": "yes_no", "yes": true } }),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "validation");

    let (status, _, _) = call(&app, post(&answer_uri, json!({ "nonsense": 1 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let ack = json!({ "seq": 0, "answer": { "type": "acknowledge" } });
    assert_eq!(call(&app, post(&answer_uri, ack.clone())).await.0, StatusCode::OK);
    let (status, body, _) = call(&app, post(&answer_uri, ack)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "conflict");
}

#[tokio::test]
async fn export_is_token_gated() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(shared(dir.path(), 4));
    assert_eq!(call(&app, get("/export")).await.0, StatusCode::UNAUTHORIZED);
    let wrong = Request::get("/export")
        .header(header::AUTHORIZATION, "Bearer nope")
        .body(Body::empty())
        .unwrap();
    assert_eq!(call(&app, wrong).await.0, StatusCode::UNAUTHORIZED);
    let ok = Request::get("/export")
        .header(header::AUTHORIZATION, "Bearer secret")
        .body(Body::empty())
        .unwrap();
    let (status, _, text) = call(&app, ok).await;
    assert_eq!(status, StatusCode::OK);
    assert!(text.starts_with("id,arm,lower_bid,upper_bid,outcome,sex,age,"));
    assert_eq!(text.lines().count(), 1);
}

#[tokio::test]
async fn export_disabled_without_token() {
    let dir = tempfile::tempdir().unwrap();
    let svc = cvm_survey::SurveyService::new(
        cvm_survey::SurveyDefinition::bundled(),
        cvm_survey::ResponseStore::open(dir.path()).unwrap(),
        cvm_survey::ServiceConfig::default(),
    );
    let app = router(std::sync::Arc::new(svc));
    let req = Request::get("/export")
        .header(header::AUTHORIZATION, "Bearer x")
        .body(Body::empty())
        .unwrap();
    assert_eq!(call(&app, req).await.0, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn healthz_and_cors() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(shared(dir.path(), 4));
    let (status, body, _) = call(&app, get("/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["survey"], "ufp-monitoring-2021");

    let preflight = Request::options("/sessions")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(preflight).await.unwrap();
    assert!(resp.headers().contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));
}

#[tokio::test]
async fn serves_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(listener, shared(dir.path(), 4), async {
        rx.await.ok();
    }));

    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream
        .write_all(b"GET /healthz HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).await.unwrap();
    assert!(raw.starts_with("HTTP/1.1 200"), "{raw}");
    assert!(raw.contains("\"status\":\"ok\""));

    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}
