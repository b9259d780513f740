#![allow(dead_code)]

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cellreach::armkin::catalog::Catalog;
use cellreach::feastool::AnalysisParams;
use cellreach_gateway::api::{router, AppState};
use cellreach_gateway::store::Store;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub struct Resp {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub body: Vec<u8>,
}

impl Resp {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

pub fn app_at(dir: &std::path::Path, max_jobs: usize) -> (Arc<AppState>, Router) {
    let state = AppState::new(Store::open(dir).unwrap(), Catalog::builtin(), AnalysisParams::default(), max_jobs).unwrap();
    let r = router(state.clone(), None);
    (state, r)
}

pub async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> Resp {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Resp { status, headers, body }
}

pub async fn json(app: &Router, method: &str, uri: &str, v: &Value) -> Resp {
    call(app, method, uri, serde_json::to_vec(v).unwrap()).await
}

/// Polls a job until it leaves queued/running.
pub async fn wait_job(app: &Router, job: &str, limit: Duration) -> Value {
    let deadline = Instant::now() + limit;
    loop {
        let r = call(app, "GET", &format!("/api/jobs/{job}"), Body::empty()).await;
        assert_eq!(r.status, StatusCode::OK);
        let v = r.json();
        let s = v["state"].as_str().unwrap().to_string();
        if s != "queued" && s != "running" {
            return v;
        }
        assert!(Instant::now() < deadline, "job {job} still {s}");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}
