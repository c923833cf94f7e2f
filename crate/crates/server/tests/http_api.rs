//! The HTTP API and event stream against a live edge and avatar over UDP.

use std::time::{Duration, Instant};

use futures::StreamExt;
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use telavatar_core::avatar::{AvatarConfig, SpeakerScript, StartPose};
use telavatar_core::edge::EdgeConfig;
use telavatar_server::{AvatarRuntime, EdgeServer};

const MAP: &str = r#"{"resolution": 0.25, "rows": [
  "........",
  "........",
  "....##..",
  "....##..",
  "........",
  "........"
]}"#;

struct Api {
    client: Client,
    base: String,
}

impl Api {
    fn new(server: &EdgeServer) -> Self {
        Self { client: Client::new(), base: format!("http://{}/api/v1", server.http_addr()) }
    }

    async fn get(&self, path: &str) -> (StatusCode, String) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status(), r.text().await.unwrap())
    }

    async fn state(&self) -> Value {
        serde_json::from_str(&self.get("/state").await.1).unwrap()
    }

    async fn send(&self, method: reqwest::Method, path: &str, body: Option<&str>) -> (StatusCode, Value) {
        let mut req = self.client.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.header("content-type", "application/json").body(b.to_string());
        }
        let r = req.send().await.unwrap();
        let status = r.status();
        let text = r.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    async fn post(&self, path: &str, body: &str) -> (StatusCode, Value) {
        self.send(reqwest::Method::POST, path, Some(body)).await
    }

    async fn put(&self, path: &str, body: &str) -> (StatusCode, Value) {
        self.send(reqwest::Method::PUT, path, Some(body)).await
    }

    async fn wait_for(&self, what: &str, timeout: Duration, pred: impl Fn(&Value) -> bool) -> Value {
        let start = Instant::now();
        loop {
            let s = self.state().await;
            if pred(&s) {
                return s;
            }
            assert!(start.elapsed() < timeout, "timed out waiting for {what}: {s}");
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }

    async fn wait_record(&self, id: u64, status: &str) -> Value {
        self.wait_for(&format!("record {id} {status}"), Duration::from_secs(20), |s| {
            s["queue"].as_array().unwrap().iter().any(|r| r["id"] == id && r["status"] == status)
        })
        .await
    }
}

async fn edge() -> EdgeServer {
    EdgeServer::start(EdgeConfig::default(), MAP.into(), "127.0.0.1:0", "127.0.0.1:0").await.unwrap()
}

async fn avatar(server: &EdgeServer) -> AvatarRuntime {
    let config = AvatarConfig { start: StartPose { x: 0.25, y: 0.25, theta: 0.0 }, ..AvatarConfig::default() };
    AvatarRuntime::start(config, SpeakerScript::default(), server.proto_addr(), "127.0.0.1:0", 7).await.unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn fresh_edge_without_avatar() {
    let server = edge().await;
    let api = Api::new(&server);

    let s = api.state().await;
    assert_eq!(s["mode"], "manual");
    assert_eq!(s["session"]["state"], "dead");
    assert!(s["pose"].is_null());
    assert_eq!(s["media"], "external");
    assert_eq!(s["queue"], json!([]));

    let (status, text) = api.get("/map").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(text, MAP);

    let (status, body) = api.post("/commands", r#"{"op":"turn-left","deg":15}"#).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["kind"], "session_dead");
    assert_eq!(api.post("/stop", "").await.0, StatusCode::SERVICE_UNAVAILABLE);

    let (status, body) = api.post("/commands", r#"{"op":"turn-left"}"#).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(api.post("/commands", r#"{"op":"turn-left","deg":-3}"#).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(api.post("/commands", "not json").await.0, StatusCode::UNPROCESSABLE_ENTITY);

    assert_eq!(api.put("/mode", r#"{"mode":"sideways"}"#).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, body) = api.put("/mode", r#"{"mode":"manual"}"#).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"previous": "manual", "cancelled": 0}));

    // the mode check comes first; a dead session would also refuse
    let (status, _) = api.post("/goal", r#"{"x":1.0,"y":0.25}"#).await;
    assert_eq!(status, StatusCode::CONFLICT);

    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn commands_goals_and_stop_over_udp() {
    let server = edge().await;
    let api = Api::new(&server);
    let bot = avatar(&server).await;

    let s = api
        .wait_for("session", Duration::from_secs(10), |s| s["session"]["state"] == "alive" && !s["pose"].is_null())
        .await;
    assert!((s["pose"]["x"].as_f64().unwrap() - 0.25).abs() < 1e-9);

    let (status, body) = api.post("/commands", r#"{"op":"turn-left","deg":15}"#).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = body["id"].as_u64().unwrap();
    api.wait_record(id, "completed").await;

    let (status, body) = api.put("/mode", r#"{"mode":"auto"}"#).await;
    assert_eq!((status, body), (StatusCode::OK, json!({"previous": "manual", "cancelled": 0})));
    assert_eq!(api.post("/commands", r#"{"op":"park"}"#).await.0, StatusCode::CONFLICT);

    let (status, body) = api.post("/goal", r#"{"x":1.125,"y":0.625}"#).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["kind"], "goal_occupied");
    let (status, body) = api.post("/goal", r#"{"x":9.0,"y":0.0}"#).await;
    assert_eq!((status, body["kind"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("goal_out_of_bounds")));
    assert_eq!(api.post("/goal", r#"{"x":1.0}"#).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = api.post("/goal", r#"{"x":0.75,"y":0.25}"#).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    let first = body["id_first"].as_u64().unwrap();
    let count = body["count"].as_u64().unwrap();
    let path = body["path"].as_array().unwrap();
    assert_eq!(path.first().unwrap(), &json!([0.25, 0.25]));
    assert_eq!(path.last().unwrap(), &json!([0.75, 0.25]));
    api.wait_record(first + count - 1, "completed").await;
    // odometry trails completion by up to one interval
    api.wait_for("pose at goal", Duration::from_secs(2), |s| {
        let (x, y) = (s["pose"]["x"].as_f64().unwrap(), s["pose"]["y"].as_f64().unwrap());
        (x - 0.75).abs() < 1e-6 && (y - 0.25).abs() < 1e-6
    })
    .await;

    // emergency stop during a long manual drive
    api.put("/mode", r#"{"mode":"manual"}"#).await;
    let (_, body) = api.post("/commands", r#"{"op":"drive-forward","m":3.0}"#).await;
    let drive = body["id"].as_u64().unwrap();
    api.wait_record(drive, "executing").await;
    let (status, body) = api.post("/stop", "").await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let stop = body["id"].as_u64().unwrap();
    let s = api.wait_record(stop, "completed").await;
    let rec = s["queue"].as_array().unwrap().iter().find(|r| r["id"] == drive).unwrap().clone();
    let s = api.wait_record(drive, "failed").await;
    let rec_after = s["queue"].as_array().unwrap().iter().find(|r| r["id"] == drive).unwrap().clone();
    assert_eq!(rec_after["detail"], "preempted", "{rec} {rec_after}");

    let pose = bot.shutdown().await;
    assert!(pose.x < 0.75 + 3.0 - 0.5, "robot was not halted: {pose:?}");
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn event_stream() {
    let server = edge().await;
    let api = Api::new(&server);
    let resp = api.client.get(format!("{}/events", api.base)).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert!(resp.headers()["content-type"].to_str().unwrap().starts_with("text/event-stream"));
    let mut body = resp.bytes_stream();

    let bot = avatar(&server).await;
    let mut text = String::new();
    let mut seen_command = false;
    let deadline = Instant::now() + Duration::from_secs(15);
    let mut submitted = false;
    while Instant::now() < deadline {
        let chunk = tokio::time::timeout(Duration::from_secs(5), body.next()).await.unwrap().unwrap().unwrap();
        text.push_str(std::str::from_utf8(&chunk).unwrap());
        if !submitted && text.contains("\"state\":\"alive\"") {
            api.put("/mode", r#"{"mode":"manual"}"#).await;
            let (status, _) = api.post("/commands", r#"{"op":"turn-right","deg":10}"#).await;
            assert_eq!(status, StatusCode::ACCEPTED);
            submitted = true;
        }
        if text.contains("\"status\":\"completed\"") && text.contains("event: odom\n") {
            seen_command = true;
            break;
        }
    }
    assert!(seen_command, "{text}");
    assert!(text.starts_with(": connected\nretry: 1000\n") || text.starts_with("retry: 1000\n"), "{text}");
    for kind in ["session", "odom", "mode", "command"] {
        assert!(text.contains(&format!("event: {kind}\n")), "no {kind} event in {text}");
    }
    // every data line is a JSON object
    for line in text.lines().filter_map(|l| l.strip_prefix("data: ")) {
        assert!(serde_json::from_str::<Value>(line).unwrap().is_object(), "{line}");
    }
    bot.shutdown().await;
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn port_in_use_is_a_bind_error() {
    let server = edge().await;
    let taken = server.http_addr().to_string();
    let err = EdgeServer::start(EdgeConfig::default(), MAP.into(), &taken, "127.0.0.1:0").await.err().unwrap();
    assert!(matches!(err, telavatar_server::ServerError::Bind { what: "http", .. }), "{err}");
    let bad_map = EdgeServer::start(EdgeConfig::default(), "{".into(), "127.0.0.1:0", "127.0.0.1:0").await.err().unwrap();
    assert!(matches!(bad_map, telavatar_server::ServerError::Map(_)));
    server.shutdown().await;
}
