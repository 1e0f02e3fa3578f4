//! Shared helpers for the integration tests.
#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use exmos::service::{router, AppState, ServiceConfig};
use exmos_core::DataTable;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn pima_csv() -> PathBuf {
    data_dir().join("pima-indians-diabetes.csv")
}

pub fn pima_meta() -> PathBuf {
    data_dir().join("pima.meta.json")
}

pub fn pima() -> DataTable {
    exmos::io::load_table(&pima_csv(), Some(&pima_meta())).expect("pima loads")
}

/// Pima parsed by hand: header and numeric rows, no library code involved.
pub fn pima_raw() -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(pima_csv()).unwrap();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap().split(',').map(|s| s.trim().to_string()).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.trim().parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

/// Run the `exmos` binary.
pub fn exmos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exmos"))
        .args(args)
        .env_remove("EXMOS_DATA")
        .env_remove("EXMOS_META")
        .env_remove("EXMOS_SEED")
        .env_remove("EXMOS_PORT")
        .env_remove("EXMOS_STATE_DIR")
        .output()
        .expect("binary runs")
}

pub fn exmos_json(args: &[&str]) -> Value {
    let out = exmos(args);
    assert!(out.status.success(), "exmos {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

pub fn pima_args<'a>(csv: &'a str, meta: &'a str) -> [&'a str; 4] {
    ["--data", csv, "--meta", meta]
}

pub fn app(table: DataTable, state_dir: Option<PathBuf>) -> Router {
    router(AppState::new(ServiceConfig { table, seed: 42, state_dir }))
}

/// One request against the router; returns status and parsed JSON body.
pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

pub async fn post_empty(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::POST, uri, None).await
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

/// Create a session and return its id and creation response.
pub async fn new_session(app: &Router, variant: &str) -> (String, Value) {
    let (status, body) = post(app, "/sessions", serde_json::json!({ "variant": variant })).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    (body["session_id"].as_str().unwrap().to_string(), body)
}
