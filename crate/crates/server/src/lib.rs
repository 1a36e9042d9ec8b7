//! HTTP/JSON service over a [`Workspace`].
//!
//! All routes live under `/v1`. Request and response bodies are JSON and
//! failures use the [`ErrorBody`] shape `{code, message, detail}`. Mutations
//! are serialized through a single write lock and run on the blocking pool,
//! so a long GA phase never stalls the async executor.

mod error;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::header::CONTENT_TYPE;
use axum::http::{Method, Request, StatusCode};
use axum::routing::{get, post};
use axum::Json;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use http_body_util::BodyExt;
use tokio::sync::RwLock;
use tower::ServiceExt;
use voselect_core::registry::RegistryDocument;
use voselect_core::social::GraphDocument;
use voselect_core::{
    validate_spec, Amendment, Description, Element, Indicator, Predicate, Relation, RunConfig, RunState,
    VOSpecification, Workspace,
};

pub use axum::Router;
pub use error::{ApiError, ErrorBody};

type Shared = Arc<RwLock<Workspace>>;
type ApiResult = Result<(StatusCode, Json<Value>), ApiError>;

const DEFAULT_LIMIT: usize = 100;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Workspace(#[from] voselect_core::WorkspaceError),
    #[error("server failed: {0}")]
    Serve(std::io::Error),
}

/// Binds `0.0.0.0:port` over the data directory and serves until the process ends.
pub async fn serve(port: u16, data_dir: impl Into<PathBuf>) -> Result<(), ServerError> {
    let ws = Workspace::open(data_dir.into())?;
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServerError::Bind { addr, source })?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(ws)).await.map_err(ServerError::Serve)
}

pub fn router(ws: Workspace) -> Router {
    let state: Shared = Arc::new(RwLock::new(ws));
    Router::new()
        .route("/v1/elements", get(list_elements).post(register_element))
        .route("/v1/elements/search", post(search_elements))
        .route("/v1/elements/{id}", get(get_element).put(update_element))
        .route("/v1/registry", get(export_registry).post(import_registry))
        .route("/v1/relations", get(list_relations).post(add_relation))
        .route("/v1/graph", get(export_graph).post(import_graph))
        .route("/v1/indicators", get(list_indicators).post(define_indicator))
        .route("/v1/indicators/{id}", get(evaluate_indicator))
        .route("/v1/notifications", get(notifications))
        .route("/v1/specs", get(list_specs).post(put_spec))
        .route("/v1/specs/validate", post(validate))
        .route("/v1/specs/{id}", get(get_spec))
        .route("/v1/runs", get(list_runs).post(start_run))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/runs/{id}/variants", get(run_variants))
        .route("/v1/runs/{id}/events", get(run_events))
        .route("/v1/runs/{id}/advance", post(advance))
        .route("/v1/runs/{id}/loopback", post(loop_back))
        .route("/v1/runs/{id}/incept", post(incept))
        .route("/v1/snapshot", post(snapshot))
        .route("/v1/export", get(export))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(state)
}

/// Sends one request through `app` in-process and returns the status and
/// JSON body (`null` when empty). Local clients use this to get exactly the
/// behavior of the network service.
pub async fn dispatch(app: &Router, method: Method, path: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header(CONTENT_TYPE, "application/json")
        .body(body.map(|v| Body::from(v.to_string())).unwrap_or_default())
        .expect("request parts are valid");
    let resp = match app.clone().oneshot(req).await {
        Ok(r) => r,
        Err(never) => match never {},
    };
    let status = resp.status();
    let bytes = match resp.into_body().collect().await {
        Ok(b) => b.to_bytes(),
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, json!({"code": "internal", "message": e.to_string(), "detail": null})),
    };
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()))
    };
    (status, value)
}

fn ok<T: Serialize>(status: StatusCode, value: &T) -> ApiResult {
    let v = serde_json::to_value(value).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((status, Json(v)))
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::bad_request("malformed request body").with_detail(json!({
            "error": e.to_string(),
            "line": e.line(),
            "column": e.column(),
        }))
    })
}

/// Runs `f` against the workspace under the write lock on the blocking pool.
async fn write<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Workspace) -> Result<T, ApiError> + Send + 'static,
{
    let mut guard = state.clone().write_owned().await;
    tokio::task::spawn_blocking(move || f(&mut guard))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    #[serde(default)]
    cursor: usize,
    limit: Option<usize>,
}

#[derive(Serialize)]
struct Page<T> {
    items: Vec<T>,
    next_cursor: usize,
}

fn page<T: Clone>(all: impl Iterator<Item = T>, q: &PageQuery) -> Page<T> {
    let items: Vec<T> = all.skip(q.cursor).take(q.limit.unwrap_or(DEFAULT_LIMIT)).collect();
    Page {
        next_cursor: q.cursor + items.len(),
        items,
    }
}

#[derive(Deserialize)]
struct ElementBody {
    element: Element,
    #[serde(default)]
    descriptions: Vec<Description>,
}

async fn list_elements(State(s): State<Shared>, Query(q): Query<PageQuery>) -> ApiResult {
    let ws = s.read().await;
    ok(StatusCode::OK, &page(ws.store().registry().elements().cloned(), &q))
}

async fn get_element(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let ws = s.read().await;
    let reg = ws.store().registry();
    let element = reg
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown element `{id}`")))?;
    ok(
        StatusCode::OK,
        &json!({
            "element": element,
            "competences": reg.competences_of(&id),
            "services": reg.services_of(&id),
        }),
    )
}

async fn register_element(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let b: ElementBody = parse(&body)?;
    let report = write(&s, move |ws| Ok(ws.register_element(b.element, b.descriptions)?)).await?;
    ok(StatusCode::CREATED, &report)
}

async fn update_element(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let b: ElementBody = parse(&body)?;
    if b.element.id != id {
        return Err(ApiError::bad_request(format!(
            "body element `{}` does not match path `{id}`",
            b.element.id
        )));
    }
    let report = write(&s, move |ws| Ok(ws.update_element(b.element, b.descriptions)?)).await?;
    ok(StatusCode::OK, &report)
}

async fn search_elements(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let query: Vec<Predicate> = parse(&body)?;
    let ws = s.read().await;
    ok(StatusCode::OK, &ws.search(&query)?)
}

async fn export_registry(State(s): State<Shared>) -> ApiResult {
    ok(StatusCode::OK, &s.read().await.store().registry().to_document())
}

async fn import_registry(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let doc: RegistryDocument = parse(&body)?;
    let report = write(&s, move |ws| Ok(ws.import_registry(doc)?)).await?;
    ok(StatusCode::CREATED, &report)
}

#[derive(Debug, Deserialize)]
struct RelationQuery {
    #[serde(rename = "type")]
    relation_type: Option<String>,
    element: Option<String>,
    #[serde(default)]
    cursor: usize,
    limit: Option<usize>,
}

async fn list_relations(State(s): State<Shared>, Query(q): Query<RelationQuery>) -> ApiResult {
    let ws = s.read().await;
    let all = ws.store().graph().relations().filter(|r| {
        q.relation_type.as_ref().is_none_or(|t| &r.relation_type == t)
            && q.element.as_ref().is_none_or(|e| &r.source == e || &r.target == e)
    });
    let pq = PageQuery {
        cursor: q.cursor,
        limit: q.limit,
    };
    ok(StatusCode::OK, &page(all.cloned(), &pq))
}

async fn add_relation(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let rel: Relation = parse(&body)?;
    let report = write(&s, move |ws| Ok(ws.add_relation(rel)?)).await?;
    ok(StatusCode::CREATED, &report)
}

async fn export_graph(State(s): State<Shared>) -> ApiResult {
    ok(StatusCode::OK, &s.read().await.store().graph().to_document())
}

async fn import_graph(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let doc: GraphDocument = parse(&body)?;
    let report = write(&s, move |ws| Ok(ws.import_graph(doc)?)).await?;
    ok(StatusCode::CREATED, &report)
}

async fn list_indicators(State(s): State<Shared>, Query(q): Query<PageQuery>) -> ApiResult {
    let ws = s.read().await;
    ok(StatusCode::OK, &page(ws.store().monitor().states().cloned(), &q))
}

async fn define_indicator(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let ind: Indicator = parse(&body)?;
    let (value, report) = write(&s, move |ws| Ok(ws.define_indicator(ind)?)).await?;
    ok(StatusCode::CREATED, &json!({ "value": value, "report": report }))
}

async fn evaluate_indicator(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let ws = s.read().await;
    let value = ws.evaluate_indicator(&id)?;
    ok(StatusCode::OK, &json!({ "id": id, "value": value }))
}

async fn notifications(State(s): State<Shared>, Query(q): Query<PageQuery>) -> ApiResult {
    let ws = s.read().await;
    ok(StatusCode::OK, &ws.poll(q.cursor as u64, q.limit.unwrap_or(DEFAULT_LIMIT)))
}

async fn list_specs(State(s): State<Shared>, Query(q): Query<PageQuery>) -> ApiResult {
    let ws = s.read().await;
    let all = ws.specs().map(|(id, spec)| json!({ "id": id, "name": spec.name }));
    ok(StatusCode::OK, &page(all, &q))
}

async fn put_spec(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let spec: VOSpecification = parse(&body)?;
    let id = write(&s, move |ws| Ok(ws.put_spec(spec)?)).await?;
    ok(StatusCode::CREATED, &json!({ "id": id }))
}

async fn get_spec(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let ws = s.read().await;
    ok(StatusCode::OK, ws.spec(&id)?)
}

async fn validate(body: Bytes) -> ApiResult {
    let spec: VOSpecification = parse(&body)?;
    let violations = validate_spec(&spec);
    ok(
        StatusCode::OK,
        &json!({ "valid": violations.is_empty(), "violations": violations }),
    )
}

#[derive(Deserialize)]
struct StartRun {
    spec_id: Option<String>,
    spec: Option<VOSpecification>,
    #[serde(default)]
    config: RunConfig,
    #[serde(default = "specified")]
    until: RunState,
}

fn specified() -> RunState {
    RunState::Specified
}

async fn list_runs(State(s): State<Shared>, Query(q): Query<PageQuery>) -> ApiResult {
    let ws = s.read().await;
    let all = ws.runs().map(|r| {
        json!({
            "run_id": r.run_id,
            "state": r.state,
            "spec_version": r.spec_version,
            "snapshot_id": r.snapshot_id,
        })
    });
    ok(StatusCode::OK, &page(all, &q))
}

async fn start_run(State(s): State<Shared>, body: Bytes) -> ApiResult {
    let req: StartRun = parse(&body)?;
    let run = write(&s, move |ws| {
        let spec = match (req.spec_id, req.spec) {
            (Some(id), None) => ws.spec(&id)?.clone(),
            (None, Some(spec)) => {
                ws.put_spec(spec.clone())?;
                spec
            }
            _ => return Err(ApiError::bad_request("give exactly one of `spec_id` and `spec`")),
        };
        Ok(ws.start_run(spec, req.config, req.until)?.clone())
    })
    .await?;
    ok(StatusCode::CREATED, &run)
}

async fn get_run(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let ws = s.read().await;
    ok(StatusCode::OK, ws.run(&id)?)
}

async fn run_variants(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let ws = s.read().await;
    ok(StatusCode::OK, &ws.variants(&id)?)
}

async fn run_events(State(s): State<Shared>, Path(id): Path<String>, Query(q): Query<PageQuery>) -> ApiResult {
    let ws = s.read().await;
    ok(StatusCode::OK, &page(ws.run(&id)?.events.iter().cloned(), &q))
}

async fn advance(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let run = write(&s, move |ws| {
        ws.advance(&id)?;
        Ok(ws.run(&id)?.clone())
    })
    .await?;
    ok(StatusCode::OK, &run)
}

#[derive(Deserialize)]
struct LoopBack {
    target: RunState,
    amendment: Option<Amendment>,
}

async fn loop_back(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: LoopBack = parse(&body)?;
    let run = write(&s, move |ws| {
        ws.loop_back(&id, req.target, req.amendment)?;
        Ok(ws.run(&id)?.clone())
    })
    .await?;
    ok(StatusCode::OK, &run)
}

#[derive(Deserialize)]
struct Incept {
    #[serde(default = "first")]
    rank: u32,
    #[serde(default)]
    override_stale: bool,
}

fn first() -> u32 {
    1
}

async fn incept(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: Incept = if body.is_empty() {
        Incept {
            rank: first(),
            override_stale: false,
        }
    } else {
        parse(&body)?
    };
    let vo_id = write(&s, move |ws| Ok(ws.incept(&id, req.rank, req.override_stale)?)).await?;
    ok(StatusCode::CREATED, &json!({ "vo_id": vo_id }))
}

async fn snapshot(State(s): State<Shared>) -> ApiResult {
    let id = write(&s, |ws| Ok(ws.snapshot()?.id().to_string())).await?;
    ok(StatusCode::CREATED, &json!({ "id": id }))
}

async fn export(State(s): State<Shared>) -> ApiResult {
    ok(StatusCode::OK, &s.read().await.export())
}
