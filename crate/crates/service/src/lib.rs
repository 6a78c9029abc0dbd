//! Read-only HTTP access to audit sessions.
//!
//! Every response body is a JSON object carrying `schema_version`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use calcaudit::analyze::{scan, CheckConfig};
use calcaudit::filter::{filter_records, summarize, FilterSpec, Summary};
use calcaudit::model::ModelError;
use calcaudit::reconstruct::{snapshot_at, Checkpoint, ContentLine};
use calcaudit::report::{render_summary, ChangeRow};
use calcaudit::{ChangeRecord, SheetGrid, Workbook};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Only files under this directory can be opened.
    pub root: PathBuf,
    /// Directory holding the built UI bundle, served at `/`.
    pub static_dir: Option<PathBuf>,
    pub checks: CheckConfig,
}

impl ServiceConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            root: root.into(),
            static_dir: None,
            checks: CheckConfig::default(),
        }
    }
}

struct Session {
    path: PathBuf,
    workbook: Workbook,
}

struct AppState {
    root: PathBuf,
    checks: CheckConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    counter: AtomicU64,
}

#[derive(Debug, thiserror::Error)]
enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let body = json!({ "schema_version": SCHEMA_VERSION, "error": self.to_string() });
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

pub fn router(config: ServiceConfig) -> std::io::Result<Router> {
    let state = Arc::new(AppState {
        root: config.root.canonicalize()?,
        checks: config.checks,
        sessions: RwLock::new(HashMap::new()),
        counter: AtomicU64::new(1),
    });
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/changes", get(changes))
        .route("/sessions/{id}/findings", get(findings))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/summary", get(summary))
        .with_state(state);
    Ok(match config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { (StatusCode::NOT_FOUND, "UI bundle not built\n") }),
    })
}

/// Binds and serves until the process ends.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let app = router(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}

/// Resolves `requested` against the root; anything that does not exist or
/// lands outside the root is reported as not found.
fn resolve_allowed(root: &Path, requested: &str) -> Option<PathBuf> {
    let candidate = root.join(requested);
    let real = candidate.canonicalize().ok()?;
    (real.starts_with(root) && real.is_file()).then_some(real)
}

#[derive(Deserialize)]
struct CreateSession {
    path: String,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let path = resolve_allowed(&state.root, &req.path).ok_or_else(|| {
        ApiError::NotFound(format!("no such file under the service root: {}", req.path))
    })?;
    let load_path = path.clone();
    let workbook = tokio::task::spawn_blocking(move || Workbook::open(&load_path))
        .await
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?
        .map_err(|e: ModelError| ApiError::Unprocessable(e.to_string()))?;

    let n = state.counter.fetch_add(1, Ordering::Relaxed);
    let id = format!("s{n}-{}", &workbook.manifest.source_digest[..12]);
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "session_id": id,
        "path": path.strip_prefix(&state.root).unwrap_or(&path),
        "recording_enabled": workbook.recording.as_str() == "enabled",
        "source_digest": workbook.manifest.source_digest,
        "summary": summary_json(&summarize(&workbook.changes)),
    });
    let session = Arc::new(Session { path, workbook });
    state
        .sessions
        .write()
        .expect("session lock")
        .insert(id, session);
    Ok((StatusCode::CREATED, Json(body)))
}

fn session(state: &AppState, id: &str) -> Result<Arc<Session>, ApiError> {
    state
        .sessions
        .read()
        .expect("session lock")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))
}

/// Decodes repeated query parameters. `+` in a query decodes to a space, so
/// a filter arriving with a leading space had a literal `+`.
fn query_params(raw: Option<String>) -> Vec<(String, String)> {
    form_urlencoded::parse(raw.unwrap_or_default().as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect()
}

fn parse_filters(params: &[(String, String)]) -> Result<Vec<FilterSpec>, ApiError> {
    params
        .iter()
        .filter(|(k, _)| k == "filter")
        .map(|(_, v)| {
            let text = match v.strip_prefix(' ') {
                Some(rest) => format!("+{rest}"),
                None => v.clone(),
            };
            text.parse::<FilterSpec>()
                .map_err(|e| ApiError::BadRequest(e.to_string()))
        })
        .collect()
}

fn checkpoint(params: &[(String, String)]) -> Option<Checkpoint> {
    params
        .iter()
        .find(|(k, _)| k == "at")
        .map(|(_, v)| v.parse().expect("infallible"))
}

fn summary_json(s: &Summary) -> Value {
    let by_kind: serde_json::Map<String, Value> = s
        .by_kind
        .iter()
        .map(|(k, n)| (k.code().to_owned(), json!(n)))
        .collect();
    let by_date: serde_json::Map<String, Value> = s
        .by_date
        .iter()
        .map(|(d, n)| (d.to_string(), json!(n)))
        .collect();
    json!({
        "total": s.total,
        "first_date": s.first_date.map(|d| d.to_string()),
        "last_date": s.last_date.map(|d| d.to_string()),
        "by_kind": by_kind,
        "by_author": s.by_author,
        "by_date": by_date,
        "text": render_summary(s),
    })
}

fn record_json(r: &ChangeRecord) -> Value {
    let row = ChangeRow::from_record(r);
    json!({
        "id": r.id,
        "kind": r.kind.code(),
        "change": row.change,
        "sheet": row.sheet,
        "address": row.address,
        "author": row.author,
        "date": row.date,
        "time": row.time,
        "timestamp": r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
        "status": row.status,
        "details": row.details,
        "before": ContentLine::from_content(&r.before),
        "after": ContentLine::from_content(&r.after),
    })
}

async fn changes(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult {
    let s = session(&state, &id)?;
    let specs = parse_filters(&query_params(raw))?;
    let records = filter_records(&specs, &s.workbook.changes)
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "filters": specs.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "records": records.iter().map(|r| record_json(r)).collect::<Vec<_>>(),
        "summary": summary_json(&summarize(records.iter().copied())),
    })))
}

/// The current grid, or the reconstruction at `at`.
fn sheets_at(s: &Session, at: Option<&Checkpoint>) -> Result<(Vec<SheetGrid>, Value), ApiError> {
    match at {
        None => Ok((
            s.workbook.sheets.clone(),
            json!({ "at": null, "applied_count": s.workbook.changes.len() }),
        )),
        Some(cp) => {
            let snap =
                snapshot_at(&s.workbook, cp).map_err(|e| ApiError::BadRequest(e.to_string()))?;
            let meta = json!({
                "at": cp.to_string(),
                "as_of": snap.as_of.map(|t| t.format("%Y-%m-%dT%H:%M:%S").to_string()),
                "applied_count": snap.applied_count,
            });
            Ok((snap.sheets, meta))
        }
    }
}

async fn findings(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult {
    let s = session(&state, &id)?;
    let cp = checkpoint(&query_params(raw));
    let (sheets, meta) = sheets_at(&s, cp.as_ref())?;
    let found = scan(&sheets, &state.checks);
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "checkpoint": meta,
        "findings": found,
    })))
}

async fn snapshot(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult {
    let s = session(&state, &id)?;
    let cp = checkpoint(&query_params(raw));
    let (sheets, meta) = sheets_at(&s, cp.as_ref())?;
    let sheets: Vec<Value> = sheets
        .iter()
        .map(|sheet| {
            let cells: Vec<Value> = sheet
                .grid
                .iter()
                .map(|((row, column), content)| {
                    let address = calcaudit::CellAddress::new(&sheet.name, column, row);
                    json!({
                        "address": address.a1(),
                        "row": row,
                        "column": column,
                        "kind": content.kind_name(),
                        "text": content.plain_text(),
                        "content": ContentLine::from_content(content),
                    })
                })
                .collect();
            json!({ "name": sheet.name, "protected": sheet.protected, "cells": cells })
        })
        .collect();
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "checkpoint": meta,
        "sheets": sheets,
    })))
}

async fn summary(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let s = session(&state, &id)?;
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "path": s.path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "recording_enabled": s.workbook.recording.as_str() == "enabled",
        "summary": summary_json(&summarize(&s.workbook.changes)),
    })))
}
