use std::path::PathBuf;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use classplay_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn lessons() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../lessons")
}

fn lesson(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(lessons().join(name)).unwrap()).unwrap()
}

fn app() -> Router {
    router(AppState::new(Some(lessons()), None).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

async fn create(app: &Router, config: Value) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(config)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

async fn event(app: &Router, id: &str, seq: u64, actor: &str, action: Value) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/sessions/{id}/events"),
        Some(json!({"expected_seq": seq, "actor": actor, "action": action})),
    )
    .await
}

/// Reads SSE frames until `count` messages arrived, returning (id, data).
async fn read_sse(app: &Router, uri: &str, last_event_id: Option<u64>, count: usize) -> Vec<(u64, Value)> {
    let mut request = Request::builder().uri(uri);
    if let Some(last) = last_event_id {
        request = request.header("last-event-id", last.to_string());
    }
    let response = app.clone().oneshot(request.body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    assert_eq!(response.headers()["content-type"], "text/event-stream");
    let mut body = response.into_body();
    let mut buffer = String::new();
    let mut out = Vec::new();
    while out.len() < count {
        let frame = tokio::time::timeout(Duration::from_secs(5), body.frame())
            .await
            .expect("stream stalled")
            .expect("stream ended early")
            .unwrap();
        let Ok(chunk) = frame.into_data() else { continue };
        buffer.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(end) = buffer.find("\n\n") {
            let message: String = buffer.drain(..end + 2).collect();
            let mut id = None;
            let mut data = None;
            for line in message.lines() {
                if let Some(v) = line.strip_prefix("id:") {
                    id = Some(v.trim().parse().unwrap());
                } else if let Some(v) = line.strip_prefix("data:") {
                    data = Some(serde_json::from_str(v.trim()).unwrap());
                }
            }
            if let (Some(id), Some(data)) = (id, data) {
                out.push((id, data));
            }
        }
    }
    out
}

fn contains_key(v: &Value, key: &str) -> bool {
    match v {
        Value::Object(m) => m.contains_key(key) || m.values().any(|x| contains_key(x, key)),
        Value::Array(a) => a.iter().any(|x| contains_key(x, key)),
        _ => false,
    }
}

#[tokio::test]
async fn healthz_is_ok() {
    let (status, body) = call(&app(), "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, "ok");
}

#[tokio::test]
async fn create_list_and_distinct_ids() {
    let app = app();
    let request = Request::builder()
        .method("POST")
        .uri("/sessions")
        .body(Body::from(lesson("cnn.lesson.json").to_string()))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    assert_eq!(response.status(), StatusCode::CREATED);
    let location = response.headers()["location"].to_str().unwrap().to_string();
    let body: Value = serde_json::from_slice(&response.into_body().collect().await.unwrap().to_bytes()).unwrap();
    let first = body["id"].as_str().unwrap().to_string();
    assert_eq!(location, format!("/sessions/{first}"));
    assert_eq!(body["state"]["status"], "setup");

    let second = create(&app, lesson("cnn.lesson.json")).await;
    assert_ne!(first, second);

    let (status, list) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 2);
    for entry in list {
        assert_eq!(entry["game"], "cnn");
        assert_eq!(entry["status"], "setup");
    }
}

#[tokio::test]
async fn invalid_config_is_400_with_diagnostics() {
    let app = app();
    let mut config = lesson("cnn.lesson.json");
    config["payload"]["connections"][0]["weight"] = json!(0);
    let (status, body) = call(&app, "POST", "/sessions", Some(config)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "invalid-config");
    let diagnostics = body["diagnostics"].as_array().unwrap();
    assert!(diagnostics.iter().any(|d| d["field"].as_str().unwrap().contains("connections[0]")));

    let request = Request::builder().method("POST").uri("/sessions").body(Body::from("{not json")).unwrap();
    assert_eq!(app.clone().oneshot(request).await.unwrap().status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sessions_can_be_created_from_named_lessons() {
    let app = app();
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"lesson": "predictors.lesson.json", "seed": 9}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["state"]["game"], "predictors");
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"lesson": "../secret.json"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn cnn_red_card_over_http() {
    let app = app();
    let id = create(&app, lesson("cnn.lesson.json")).await;
    let (status, body) = event(&app, &id, 0, "teacher", json!({"type": "start"})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["seq"], 0);
    assert_eq!(body["next_seq"], 1);
    let (status, body) = event(&app, &id, 1, "student-R", json!({"type": "present", "signals": {"R": 1}})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["seq"], 1);
    assert_eq!(body["outcome"]["decision"], "negative");
    let bits: Vec<u64> = body["outcome"]["trace"].as_array().unwrap().iter().map(|a| a["bit"].as_u64().unwrap()).collect();
    assert_eq!(bits, [1, 0, 1, 0, 0]);
}

#[tokio::test]
async fn stale_seq_conflicts_and_unknown_session_is_404() {
    let app = app();
    let id = create(&app, lesson("cnn.lesson.json")).await;
    event(&app, &id, 0, "teacher", json!({"type": "start"})).await;
    let (status, body) = event(&app, &id, 0, "teacher", json!({"type": "finish"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "seq-conflict");
    assert_eq!(body["next_seq"], 1);

    let (status, body) = event(&app, "nope", 0, "teacher", json!({"type": "start"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "session-not-found");
    for path in ["/sessions/nope/state", "/sessions/nope/stream"] {
        assert_eq!(call(&app, "GET", path, None).await.0, StatusCode::NOT_FOUND);
    }
}

#[tokio::test]
async fn opening_a_box_twice_is_422_wrong_phase() {
    let app = app();
    let id = create(&app, lesson("surprise_box.lesson.json")).await;
    let steps = [
        ("teacher", json!({"type": "start"})),
        ("teacher", json!({"type": "begin_round", "player": "ana"})),
        ("ana", json!({"type": "skip_card"})),
        ("ana", json!({"type": "open_box", "box": "A"})),
    ];
    for (seq, (actor, action)) in steps.into_iter().enumerate() {
        let (status, body) = event(&app, &id, seq as u64, actor, action).await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
    let (status, body) = event(&app, &id, 4, "ana", json!({"type": "open_box", "box": "B"})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "wrong-phase");
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["next_seq"], 4);
}

#[tokio::test]
async fn state_projection_by_view() {
    let app = app();
    let id = create(&app, lesson("surprise_box.lesson.json")).await;
    event(&app, &id, 0, "teacher", json!({"type": "start"})).await;
    event(&app, &id, 1, "teacher", json!({"type": "begin_round", "player": "ana"})).await;
    let (_, bought) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/events?view=student"),
        Some(json!({"expected_seq": 2, "actor": "ana", "action": {"type": "buy_card", "side": "B"}})),
    )
    .await;
    assert!(!contains_key(&bought, "prob_major"));

    let (_, student) = call(&app, "GET", &format!("/sessions/{id}/state?view=student"), None).await;
    assert!(!contains_key(&student, "prob_major"));
    let (_, teacher) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert!(contains_key(&teacher, "prob_major"));
    assert!(!contains_key(&teacher, "major_box"));

    event(&app, &id, 3, "ana", json!({"type": "open_box", "box": "A"})).await;
    let (_, after) = call(&app, "GET", &format!("/sessions/{id}/state?view=student"), None).await;
    assert!(contains_key(&after, "major_box"));

    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/state?view=projector"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn stream_is_ordered_resumable_and_identical_across_clients() {
    let app = app();
    let id = create(&app, lesson("predictors.lesson.json")).await;
    event(&app, &id, 0, "teacher", json!({"type": "start"})).await;
    let uri = format!("/sessions/{id}/stream");

    // A follower connected before the next events arrive.
    let early = tokio::spawn({
        let app = app.clone();
        let uri = uri.clone();
        async move { read_sse(&app, &uri, None, 4).await }
    });
    tokio::time::sleep(Duration::from_millis(50)).await;
    for seq in 1..=3 {
        let (status, _) = event(&app, &id, seq, "teacher", json!({"type": "reveal"})).await;
        assert_eq!(status, StatusCode::OK);
    }
    let early = early.await.unwrap();
    assert_eq!(early.iter().map(|(s, _)| *s).collect::<Vec<_>>(), [0, 1, 2, 3]);
    for (seq, data) in &early {
        assert_eq!(data["seq"], *seq);
        assert_eq!(data["state"]["next_seq"], seq + 1);
    }

    let late = read_sse(&app, &uri, None, 4).await;
    assert_eq!(late, early);

    let resumed = read_sse(&app, &uri, Some(2), 1).await;
    assert_eq!(resumed[0].0, 3);
    assert_eq!(resumed[0], early[3]);

    let student = read_sse(&app, &format!("{uri}?view=student"), None, 4).await;
    assert!(student.iter().all(|(_, d)| !contains_key(d, "upcoming")));
    assert!(early.iter().all(|(_, d)| contains_key(d, "upcoming")));
}

#[tokio::test]
async fn stream_ends_after_finish() {
    let app = app();
    let id = create(&app, lesson("cnn.lesson.json")).await;
    event(&app, &id, 0, "teacher", json!({"type": "start"})).await;
    event(&app, &id, 1, "teacher", json!({"type": "finish"})).await;
    let response = app
        .clone()
        .oneshot(Request::builder().uri(format!("/sessions/{id}/stream")).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let bytes = tokio::time::timeout(Duration::from_secs(5), response.into_body().collect())
        .await
        .expect("finished stream closes")
        .unwrap()
        .to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    assert_eq!(text.matches("data:").count(), 2);
}

#[tokio::test]
async fn resume_restores_sessions_from_logs() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(Some(lessons()), Some(dir.path().to_path_buf())).unwrap();
    let app = router(state);
    let id = create(&app, lesson("surprise_box.lesson.json")).await;
    let steps = [
        ("teacher", json!({"type": "start"})),
        ("teacher", json!({"type": "begin_round", "player": "ana"})),
        ("ana", json!({"type": "buy_card", "side": "A"})),
    ];
    for (seq, (actor, action)) in steps.into_iter().enumerate() {
        event(&app, &id, seq as u64, actor, action).await;
    }
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    let stream_before = read_sse(&app, &format!("/sessions/{id}/stream"), None, 3).await;
    drop(app);

    let (state, failures) = AppState::resume(Some(lessons()), dir.path().to_path_buf()).unwrap();
    assert!(failures.is_empty(), "{failures:?}");
    assert_eq!(state.session_count(), 1);
    let app = router(state);
    let (_, after) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(after, before);
    assert_eq!(read_sse(&app, &format!("/sessions/{id}/stream"), None, 3).await, stream_before);

    // The restored session keeps going, with the same card draws as before.
    let (status, body) = event(&app, &id, 3, "ana", json!({"type": "open_box", "box": "B"})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
}

#[tokio::test]
async fn resume_reports_corrupt_logs() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::new(None, Some(dir.path().to_path_buf())).unwrap());
    let id = create(&app, lesson("cnn.lesson.json")).await;
    event(&app, &id, 0, "teacher", json!({"type": "start"})).await;
    std::fs::write(dir.path().join(format!("{id}.jsonl")), "{\"seq\": 3}\n").unwrap();
    let (state, failures) = AppState::resume(None, dir.path().to_path_buf()).unwrap();
    assert_eq!(state.session_count(), 0);
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0].id, id);
}
