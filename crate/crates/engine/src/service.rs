//! JSON HTTP API.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/runs` | start a run: `{"query", "molecule_id", "run_id"?}` → 202 |
//! | GET | `/runs/{id}` | run record |
//! | GET | `/runs/{id}/trace` | trace events |
//! | POST | `/adjudications` | record a verdict on a completed run → 201 |
//! | GET | `/metrics/{query}` | counts and metrics, `?adjudicator=` to filter |
//! | GET | `/chunks/{id}` | one chunk |
//! | GET | `/rubrics`, `/rubrics/{query}` | adjudication rubrics |
//! | GET | `/health` | liveness |
//!
//! Errors are `{"error": "..."}` with 400 for bad input, 404 for unknown
//! ids, 409 for conflicts and 500 otherwise.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evidence_core::eval::{rubric, rubrics, AdjudicationRecord, BenchmarkQuery, EvalError};
use evidence_core::ingest::ChunkId;
use evidence_core::pipeline::RunRequest;
use evidence_core::MoleculeId;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::adjudications::AdjudicationStore;
use crate::engine::Engine;
use crate::error::EngineError;
use crate::runs::{now, RunStatus, RunStore};

pub struct AppState {
    /// Absent when the service was started without an index.
    pub engine: Option<Arc<Engine>>,
    pub runs: Arc<RunStore>,
    pub adjudications: Arc<AdjudicationStore>,
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }
    fn not_found(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::NOT_FOUND, msg.into())
    }
    fn conflict(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::CONFLICT, msg.into())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Eval(EvalError::DuplicateRecord(_)) => StatusCode::CONFLICT,
            e if e.is_user_error() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "request failed");
        }
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/runs", post(start_run))
        .route("/runs/:id", get(get_run))
        .route("/runs/:id/trace", get(get_trace))
        .route("/adjudications", post(add_adjudication))
        .route("/metrics/:query", get(get_metrics))
        .route("/chunks/:id", get(get_chunk))
        .route("/rubrics", get(|| async { Json(rubrics()) }))
        .route("/rubrics/:query", get(get_rubric))
        .with_state(state)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StartRun {
    query: String,
    molecule_id: Option<MoleculeId>,
    run_id: Option<String>,
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: Value) -> ApiResult<T> {
    serde_json::from_value(body).map_err(|e| ApiError::bad(format!("malformed body: {e}")))
}

async fn start_run(State(s): State<Arc<AppState>>, Json(body): Json<Value>) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: StartRun = parse_body(body)?;
    if req.query.trim().is_empty() {
        return Err(ApiError::bad("query is empty"));
    }
    let Some(molecule) = req.molecule_id else { return Err(ApiError::bad("molecule_id is required")) };
    let engine = s.engine.clone().ok_or_else(|| ApiError::conflict("no index is loaded"))?;
    if !engine.registry().contains(&molecule) {
        return Err(ApiError::bad(format!("molecule {molecule} is not in the registry")));
    }
    let run_id = req.run_id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    if s.runs.get(&run_id)?.is_some() {
        return Err(ApiError::conflict(format!("run {run_id} already exists")));
    }
    let record = s.runs.start(&run_id, &req.query, Some(molecule.clone()))?;
    let runs = s.runs.clone();
    let request = RunRequest { run_id: run_id.clone(), query: req.query, molecule_id: Some(molecule) };
    tokio::task::spawn_blocking(move || {
        let result = match engine.run(&request) {
            Ok(out) => runs.complete(record, out),
            Err(e) => runs.fail(record, e.to_string()),
        };
        if let Err(e) = result {
            tracing::error!(run_id = %request.run_id, error = %e, "could not persist run");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": run_id, "status": RunStatus::Running }))))
}

async fn get_run(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let record = s.runs.get(&id)?.ok_or_else(|| ApiError::not_found(format!("no run {id}")))?;
    Ok(Json(serde_json::to_value(record).expect("record serializes")))
}

async fn get_trace(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let trace = s.runs.trace(&id)?.ok_or_else(|| ApiError::not_found(format!("no run {id}")))?;
    Ok(Json(serde_json::to_value(trace).expect("trace serializes")))
}

async fn add_adjudication(
    State(s): State<Arc<AppState>>,
    Json(mut body): Json<Value>,
) -> ApiResult<(StatusCode, Json<AdjudicationRecord>)> {
    if let Some(obj) = body.as_object_mut() {
        obj.entry("timestamp").or_insert_with(|| Value::String(now()));
    }
    let record: AdjudicationRecord = parse_body(body)?;
    let run =
        s.runs.get(&record.query_id)?.ok_or_else(|| ApiError::not_found(format!("no run {}", record.query_id)))?;
    if run.status != RunStatus::Complete {
        return Err(ApiError::conflict(format!("run {} is not complete", run.run_id)));
    }
    if run.molecule_id.as_ref().is_some_and(|m| *m != record.molecule_id) {
        return Err(ApiError::bad(format!("run {} is about a different molecule", run.run_id)));
    }
    s.adjudications.add(record.clone())?;
    Ok((StatusCode::CREATED, Json(record)))
}

fn benchmark_query(q: &str) -> ApiResult<BenchmarkQuery> {
    q.parse().map_err(|_| ApiError::not_found(format!("no benchmark query {q}")))
}

#[derive(Deserialize)]
struct MetricsParams {
    adjudicator: Option<String>,
}

async fn get_metrics(
    State(s): State<Arc<AppState>>,
    Path(q): Path<String>,
    Query(p): Query<MetricsParams>,
) -> ApiResult<Json<Value>> {
    let query = benchmark_query(&q)?;
    let m = s.adjudications.metrics(query, p.adjudicator.as_deref())?;
    Ok(Json(json!({ "query": query, "adjudicator": p.adjudicator, "counts": m.counts, "metrics": m.metrics })))
}

async fn get_chunk(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let chunk_id: ChunkId = id.parse().map_err(|_| ApiError::bad(format!("{id:?} is not a chunk id")))?;
    let engine = s.engine.as_ref().ok_or_else(|| ApiError::conflict("no corpus is loaded"))?;
    let chunk = engine.store.chunks.get(&chunk_id).ok_or_else(|| ApiError::not_found(format!("no chunk {id}")))?;
    Ok(Json(serde_json::to_value(chunk).expect("chunk serializes")))
}

async fn get_rubric(Path(q): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(serde_json::to_value(rubric(benchmark_query(&q)?)).expect("rubric serializes")))
}

/// Serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
