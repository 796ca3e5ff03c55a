//! Talk to the session service: create a session, ask for suggestions, pick, read the log.

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::Request;
use gnt_harness::scenario::{Placement, ScenarioKind};
use gnt_harness::Scenario;
use gnt_service::{router, Registry, SessionConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> anyhow::Result<String> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))?;
    let resp = app.clone().oneshot(req).await?;
    Ok(String::from_utf8(to_bytes(resp.into_body(), usize::MAX).await?.to_vec())?)
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let app = router(Arc::new(Registry::open(dir.path(), 0.05)?));
    let scenario = Scenario::new(ScenarioKind::GridBlock { side: 20, radius: 4.0, placement: Placement::Center }, 400, 0, 2.0);
    let created: Value = serde_json::from_str(&call(&app, "POST", "/sessions", Some(serde_json::to_value(SessionConfig::generated(scenario, 0))?)).await?)?;
    let sid = created["session_id"].as_str().unwrap_or_default().to_string();
    println!("session {sid}: {} masked entries", created["entries"].as_array().map_or(0, Vec::len));
    for _ in 0..30 {
        let s: Value = serde_json::from_str(&call(&app, "GET", &format!("/sessions/{sid}/suggest?policy=grid&limit=1"), None).await?)?;
        let Some(id) = s["candidates"][0]["id"].as_u64() else { break };
        let out: Value = serde_json::from_str(&call(&app, "POST", &format!("/sessions/{sid}/pick"), Some(json!({ "hypothesis_id": id }))).await?)?;
        println!("picked {id:>3}: S={:.2} status={}", out["statistic"].as_f64().unwrap_or(f64::NAN), out["status"]);
        if out["status"] != "running" {
            break;
        }
    }
    println!("log:\n{}", call(&app, "GET", &format!("/sessions/{sid}/log"), None).await?);
    Ok(())
}
