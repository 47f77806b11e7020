//! HTTP service over one workspace. Every response carries the workspace
//! revision (in the body and in the `x-adr-revision` header). Mutating
//! requests may name the revision they were based on; a stale one is
//! answered with 409 and changes nothing.

use crate::ops::{self, Kind, OpError};
use adr_core::io::{forest_doc, GraphDoc, Workspace};
use adr_core::recovery::Decision;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

pub struct AppState {
    pub workspace: Workspace,
    pub revision: u64,
    /// saved after every successful mutation when set
    pub path: Option<PathBuf>,
}

pub type Shared = Arc<Mutex<AppState>>;

pub fn shared(workspace: Workspace, path: Option<PathBuf>) -> Shared {
    Arc::new(Mutex::new(AppState {
        workspace,
        revision: 1,
        path,
    }))
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/workspace", get(workspace))
        .route("/systems/{id}/graph", get(graph))
        .route("/systems/{id}/graph.dot", get(graph_dot))
        .route("/systems/{id}/forest", get(forest))
        .route("/systems/{id}/forest.dot", get(forest_dot))
        .route("/systems/{id}/productions/{name}/apply", post(apply_production))
        .route("/systems/{id}/rules/{name}/matches", post(rule_matches))
        .route("/systems/{id}/rules/{name}/apply", post(apply_rule))
        .route("/systems/{id}/recovery/start", post(recovery_start))
        .route("/systems/{id}/recovery", get(recovery))
        .route("/systems/{id}/recovery/decision", post(recovery_decision))
        .route("/systems/{id}/recovery/candidates", get(recovery_candidates))
        .with_state(state)
}

struct ApiError {
    status: StatusCode,
    message: String,
    revision: u64,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        with_revision(
            self.status,
            json!({ "error": self.message, "revision": self.revision }),
            self.revision,
        )
    }
}

fn with_revision(status: StatusCode, body: Value, revision: u64) -> Response {
    let mut r = (status, Json(body)).into_response();
    r.headers_mut().insert("x-adr-revision", HeaderValue::from(revision));
    r
}

fn fail(e: OpError, revision: u64) -> ApiError {
    let status = match e.kind {
        Kind::NotFound => StatusCode::NOT_FOUND,
        Kind::Conflict => StatusCode::CONFLICT,
        Kind::Invalid => StatusCode::UNPROCESSABLE_ENTITY,
    };
    ApiError {
        status,
        message: e.message,
        revision,
    }
}

type ApiResult = Result<Response, ApiError>;

/// Runs a read-only handler body under the lock.
fn read(state: &Shared, f: impl FnOnce(&Workspace) -> Result<Value, OpError>) -> ApiResult {
    let st = state.lock().unwrap();
    let mut body = f(&st.workspace).map_err(|e| fail(e, st.revision))?;
    body["revision"] = json!(st.revision);
    Ok(with_revision(StatusCode::OK, body, st.revision))
}

/// Runs one mutation on a copy of the workspace and commits it with a new
/// revision, or rejects it when `based_on` is stale.
fn write(state: &Shared, based_on: Option<u64>, f: impl FnOnce(&mut Workspace) -> Result<Value, OpError>) -> ApiResult {
    let mut st = state.lock().unwrap();
    let rev = st.revision;
    if let Some(b) = based_on {
        if b != rev {
            return Err(fail(
                OpError::conflict(format!("stale revision {b}, current is {rev}")),
                rev,
            ));
        }
    }
    let mut ws = st.workspace.clone();
    let mut body = f(&mut ws).map_err(|e| fail(e, rev))?;
    if let Some(p) = &st.path {
        ws.save(p).map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
            revision: rev,
        })?;
    }
    st.workspace = ws;
    st.revision += 1;
    body["revision"] = json!(st.revision);
    Ok(with_revision(StatusCode::OK, body, st.revision))
}

fn dot(state: &Shared, f: impl FnOnce(&Workspace) -> Result<String, OpError>) -> ApiResult {
    let st = state.lock().unwrap();
    let text = f(&st.workspace).map_err(|e| fail(e, st.revision))?;
    let mut r = text.into_response();
    r.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("text/vnd.graphviz"));
    r.headers_mut().insert("x-adr-revision", HeaderValue::from(st.revision));
    Ok(r)
}

fn graph_body(ws: &Workspace, id: &str) -> Result<Value, OpError> {
    Ok(json!({ "graph": GraphDoc::from(&ops::entry(ws, id)?.system.graph) }))
}

fn forest_body(ws: &Workspace, id: &str) -> Result<Value, OpError> {
    let sys = &ops::entry(ws, id)?.system;
    Ok(json!({ "forest": forest_doc(sys), "roots": sys.forest.roots(), "text": sys.forest_text() }))
}

async fn workspace(State(s): State<Shared>) -> ApiResult {
    read(&s, |ws| Ok(json!({ "workspace": ws.to_doc() })))
}

async fn graph(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    read(&s, |ws| graph_body(ws, &id))
}

async fn graph_dot(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    dot(&s, |ws| Ok(ops::entry(ws, &id)?.system.graph.to_dot(&id)))
}

async fn forest(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    read(&s, |ws| forest_body(ws, &id))
}

async fn forest_dot(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    dot(&s, |ws| Ok(ops::entry(ws, &id)?.system.forest_dot(&id)))
}

#[derive(Deserialize)]
struct ApplyProduction {
    edge: String,
    revision: Option<u64>,
}

async fn apply_production(
    State(s): State<Shared>,
    Path((id, name)): Path<(String, String)>,
    Json(req): Json<ApplyProduction>,
) -> ApiResult {
    write(&s, req.revision, |ws| {
        let step = ops::apply_production(ws, &id, &name, &req.edge)?;
        let mut body = graph_body(ws, &id)?;
        body["vertex"] = json!(step.vertex);
        body["children"] = json!(step.children);
        body["created"] = json!(step.created);
        Ok(body)
    })
}

async fn rule_matches(State(s): State<Shared>, Path((id, name)): Path<(String, String)>) -> ApiResult {
    read(&s, |ws| Ok(json!({ "matches": ops::rule_matches(ws, &id, &name)? })))
}

#[derive(Deserialize, Default)]
struct ApplyRule {
    vertex: Option<String>,
    revision: Option<u64>,
}

async fn apply_rule(
    State(s): State<Shared>,
    Path((id, name)): Path<(String, String)>,
    body: Option<Json<ApplyRule>>,
) -> ApiResult {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    write(&s, req.revision, |ws| {
        let root = ops::apply_rule(ws, &id, &name, req.vertex.as_deref())?;
        let mut body = forest_body(ws, &id)?;
        body["root"] = json!(root);
        body["graph"] = json!(GraphDoc::from(&ops::entry(ws, &id)?.system.graph));
        Ok(body)
    })
}

#[derive(Deserialize, Default)]
struct StartRecovery {
    invariant: Option<String>,
    revision: Option<u64>,
}

async fn recovery_start(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: Option<Json<StartRecovery>>,
) -> ApiResult {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    write(&s, req.revision, |ws| {
        Ok(json!({ "session": ops::start_recovery(ws, &id, req.invariant.as_deref())? }))
    })
}

async fn recovery(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    read(&s, |ws| Ok(json!({ "session": ops::session(ws, &id)? })))
}

#[derive(Deserialize)]
struct DecisionRequest {
    decision: Decision,
    revision: Option<u64>,
}

async fn recovery_decision(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<DecisionRequest>,
) -> ApiResult {
    write(&s, req.revision, |ws| {
        let session = ops::decide(ws, &id, req.decision)?;
        let mut body = graph_body(ws, &id)?;
        body["session"] = json!(session);
        Ok(body)
    })
}

async fn recovery_candidates(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    read(&s, |ws| {
        let v = ops::session(ws, &id)?;
        Ok(json!({ "state": v.state, "candidates": v.candidates }))
    })
}

/// Serves until the process is stopped.
pub async fn serve(state: Shared, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    axum::serve(listener, router(state)).await
}
