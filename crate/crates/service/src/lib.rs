//! HTTP/JSON API over one loaded project.
//!
//! Reads run concurrently. Mutations are serialized by an exclusive guard;
//! a mutation that arrives while another is running, or whose `ifRevision`
//! header names a stale revision, is rejected with 409. Every response
//! carries the current revision in the `x-revision` header.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use dircam_core::config::RuleParams;
use dircam_core::playback::{execute, export_track, PlaybackConfig, TrackFormat};
use dircam_core::preview::render_preview;
use dircam_core::project::{Project, ProjectError, PREVIEW_HEIGHT, PREVIEW_WIDTH};
use dircam_core::rng::derive_seed;
use dircam_core::storyboard::{resimulate, save_storyboard, set_locked, simulate_all, SimulationInputs, Storyboard, StoryboardError};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{Mutex, RwLock};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const REVISION_HEADER: &str = "x-revision";
pub const IF_REVISION_HEADER: &str = "ifrevision";
pub const PORT_ENV: &str = "DIRCAM_PORT";
pub const DEFAULT_PORT: u16 = 7878;

pub struct Session {
    pub project: Project,
    pub inputs: Arc<SimulationInputs>,
    pub storyboard: Option<Storyboard>,
    pub revision: u64,
    /// The in-memory storyboard differs from the one on disk.
    pub dirty: bool,
}

pub struct AppState {
    session: RwLock<Session>,
    mutation: Mutex<()>,
    busy: AtomicBool,
}

impl AppState {
    pub fn new(project: Project, inputs: SimulationInputs, storyboard: Option<Storyboard>) -> Arc<Self> {
        Arc::new(Self {
            session: RwLock::new(Session {
                project,
                inputs: Arc::new(inputs),
                storyboard,
                revision: 0,
                dirty: false,
            }),
            mutation: Mutex::new(()),
            busy: AtomicBool::new(false),
        })
    }

    /// Loads the project, bakes or reuses grid caches and picks up an
    /// existing `storyboard.json` if its marker set matches.
    pub fn load(config_path: &Path) -> Result<Arc<Self>, ProjectError> {
        let project = Project::load(config_path)?;
        let (grids, _) = project.grids(false)?;
        let inputs = project.inputs(grids)?;
        let storyboard = project
            .load_storyboard()
            .ok()
            .filter(|sb| sb.nodes.len() == inputs.envs.len());
        Ok(Self::new(project, inputs, storyboard))
    }

    pub async fn revision(&self) -> u64 {
        self.session.read().await.revision
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<StoryboardError> for ApiError {
    fn from(e: StoryboardError) -> Self {
        let status = match e {
            StoryboardError::LockedTarget(_) => StatusCode::LOCKED,
            StoryboardError::UnknownMarker(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        match e {
            ProjectError::Params(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            ProjectError::Storyboard(s) => s.into(),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn with_revision(revision: u64, response: impl IntoResponse) -> Response {
    let mut r = response.into_response();
    r.headers_mut()
        .insert(HeaderName::from_static(REVISION_HEADER), HeaderValue::from(revision));
    r
}

type ApiResult = Result<Response, Response>;

async fn fail(state: &AppState, e: impl Into<ApiError>) -> Response {
    with_revision(state.revision().await, e.into())
}

/// Holds the exclusive mutation guard and the busy flag for its lifetime.
struct MutationGuard<'a> {
    _guard: tokio::sync::MutexGuard<'a, ()>,
    busy: &'a AtomicBool,
}

impl Drop for MutationGuard<'_> {
    fn drop(&mut self) {
        self.busy.store(false, Ordering::SeqCst);
    }
}

async fn begin_mutation<'a>(state: &'a AppState, headers: &HeaderMap) -> Result<MutationGuard<'a>, Response> {
    let Ok(guard) = state.mutation.try_lock() else {
        return Err(fail(state, ApiError::new(StatusCode::CONFLICT, "another mutation is in progress")).await);
    };
    state.busy.store(true, Ordering::SeqCst);
    let guard = MutationGuard {
        _guard: guard,
        busy: &state.busy,
    };
    if let Some(v) = headers.get(IF_REVISION_HEADER) {
        let current = state.revision().await;
        let expected = v.to_str().ok().and_then(|s| s.trim().parse::<u64>().ok());
        match expected {
            Some(e) if e == current => {}
            Some(e) => {
                return Err(fail(
                    state,
                    ApiError::new(StatusCode::CONFLICT, format!("stale revision {e}, current is {current}")),
                )
                .await)
            }
            None => return Err(fail(state, ApiError::new(StatusCode::BAD_REQUEST, "ifRevision must be an integer")).await),
        }
    }
    Ok(guard)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("worker task panicked")
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn get_project(State(state): State<Arc<AppState>>) -> Response {
    let s = state.session.read().await;
    let stale: BTreeSet<&str> = s
        .storyboard
        .as_ref()
        .map(|sb| sb.stale_markers.iter().map(String::as_str).collect())
        .unwrap_or_default();
    let markers: Vec<Value> = s
        .project
        .timeline
        .markers
        .iter()
        .map(|m| {
            let node = s.storyboard.as_ref().and_then(|sb| sb.node(&m.id));
            json!({
                "id": m.id,
                "time": m.time,
                "targets": m.targets,
                "dramatisation": m.dramatisation,
                "pace": m.pace,
                "locked": node.map(|n| n.locked).unwrap_or(m.locked),
                "stale": stale.contains(m.id.as_str()),
                "degraded": node.map(|n| n.plan.degraded),
            })
        })
        .collect();
    let busy = state.busy.load(Ordering::SeqCst);
    let body = json!({
        "revision": s.revision,
        "status": if busy { "busy" } else { "idle" },
        "dirty": s.dirty,
        "scenePath": s.project.config.scene_path,
        "datasetPath": s.project.config.dataset_path,
        "director": s.project.profile.director,
        "seed": s.project.config.seed,
        "params": s.project.params,
        "techniques": s.project.config.techniques,
        "duration": s.project.timeline.duration,
        "markers": markers,
        "hasStoryboard": s.storyboard.is_some(),
    });
    with_revision(s.revision, Json(body))
}

async fn get_storyboard(State(state): State<Arc<AppState>>) -> ApiResult {
    let s = state.session.read().await;
    let Some(sb) = &s.storyboard else {
        return Err(with_revision(s.revision, ApiError::new(StatusCode::NOT_FOUND, "no storyboard; simulate first")));
    };
    Ok(with_revision(
        s.revision,
        ([(header::CONTENT_TYPE, "application/json")], save_storyboard(sb)),
    ))
}

async fn get_preview(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let s = state.session.read().await;
    let node = s.storyboard.as_ref().and_then(|sb| sb.node(&id));
    let Some(node) = node else {
        return Err(with_revision(s.revision, ApiError::new(StatusCode::NOT_FOUND, format!("no preview for `{id}`"))));
    };
    let svg = render_preview(&node.plan, &s.project.scene, PREVIEW_WIDTH, PREVIEW_HEIGHT);
    Ok(with_revision(s.revision, ([(header::CONTENT_TYPE, "image/svg+xml")], svg)))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SimulateBody {
    seed: Option<u64>,
}

fn storyboard_reply(revision: u64, sb: &Storyboard) -> Response {
    let value: Value = serde_json::from_slice(&save_storyboard(sb)).expect("storyboard is JSON");
    with_revision(revision, Json(json!({ "revision": revision, "storyboard": value })))
}

fn parse_body<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, ApiError> {
    let bytes = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid body: {e}")))
}

async fn post_simulate(State(state): State<Arc<AppState>>, headers: HeaderMap, body: axum::body::Bytes) -> ApiResult {
    let body: SimulateBody = match parse_body(&body) {
        Ok(b) => b,
        Err(e) => return Err(fail(&state, e).await),
    };
    let _guard = begin_mutation(&state, &headers).await?;
    let (inputs, config) = {
        let s = state.session.read().await;
        let seed = body.seed.unwrap_or(s.project.config.seed);
        (Arc::clone(&s.inputs), s.project.simulation_config(seed))
    };
    let sb = blocking(move || simulate_all(&inputs, config)).await;
    let mut s = state.session.write().await;
    s.revision += 1;
    s.dirty = true;
    let reply = storyboard_reply(s.revision, &sb);
    s.storyboard = Some(sb);
    Ok(reply)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ResimulateBody {
    marker_ids: Vec<String>,
    seed: Option<u64>,
}

async fn post_resimulate(State(state): State<Arc<AppState>>, headers: HeaderMap, body: axum::body::Bytes) -> ApiResult {
    let body: ResimulateBody = match parse_body(&body) {
        Ok(b) => b,
        Err(e) => return Err(fail(&state, e).await),
    };
    let _guard = begin_mutation(&state, &headers).await?;
    let (inputs, sb, seed) = {
        let s = state.session.read().await;
        let Some(sb) = s.storyboard.clone() else {
            return Err(with_revision(s.revision, ApiError::new(StatusCode::CONFLICT, "no storyboard; simulate first")));
        };
        // Without an explicit seed each revision yields a fresh, reproducible draw.
        let seed = body.seed.unwrap_or_else(|| derive_seed(sb.config.seed, s.revision + 1));
        (Arc::clone(&s.inputs), sb, seed)
    };
    let ids: BTreeSet<String> = body.marker_ids.into_iter().collect();
    let result = blocking(move || resimulate(&sb, &inputs, &ids, seed)).await;
    let sb = match result {
        Ok(sb) => sb,
        Err(e) => return Err(fail(&state, e).await),
    };
    let mut s = state.session.write().await;
    s.revision += 1;
    s.dirty = true;
    let reply = storyboard_reply(s.revision, &sb);
    s.storyboard = Some(sb);
    Ok(reply)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LockBody {
    locked: bool,
}

async fn post_lock(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> ApiResult {
    let body: LockBody = match parse_body(&body) {
        Ok(b) => b,
        Err(e) => return Err(fail(&state, e).await),
    };
    let _guard = begin_mutation(&state, &headers).await?;
    let mut s = state.session.write().await;
    let revision = s.revision;
    let Some(sb) = s.storyboard.as_mut() else {
        let known = s.project.timeline.marker(&id).is_some();
        let (status, msg) = if known {
            (StatusCode::CONFLICT, "no storyboard; simulate first".to_string())
        } else {
            (StatusCode::NOT_FOUND, format!("unknown marker `{id}`"))
        };
        return Err(with_revision(revision, ApiError::new(status, msg)));
    };
    if let Err(e) = set_locked(sb, &BTreeSet::from([id.clone()]), body.locked) {
        return Err(with_revision(revision, ApiError::from(e)));
    }
    s.revision += 1;
    s.dirty = true;
    let revision = s.revision;
    Ok(with_revision(
        revision,
        Json(json!({ "revision": revision, "markerId": id, "locked": body.locked })),
    ))
}

async fn patch_params(State(state): State<Arc<AppState>>, headers: HeaderMap, body: axum::body::Bytes) -> ApiResult {
    let patch: Value = match parse_body(&body) {
        Ok(b) => b,
        Err(e) => return Err(fail(&state, e).await),
    };
    let _guard = begin_mutation(&state, &headers).await?;
    let (params, inputs, overrides) = {
        let s = state.session.read().await;
        let params: RuleParams = match s.project.params.patched(&patch) {
            Ok(p) => p,
            Err(e) => return Err(with_revision(s.revision, ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))),
        };
        (params, Arc::clone(&s.inputs), s.project.config.techniques.clone())
    };
    let rebuilt = {
        let params = params.clone();
        blocking(move || inputs.with_params(&params, &overrides)).await
    };
    let rebuilt = match rebuilt {
        Ok(i) => i,
        Err(e) => return Err(fail(&state, e).await),
    };
    let mut s = state.session.write().await;
    s.project.params = params.clone();
    s.inputs = Arc::new(rebuilt);
    if let Some(sb) = s.storyboard.as_mut() {
        sb.config.params = params.clone();
    }
    s.revision += 1;
    s.dirty = true;
    let revision = s.revision;
    Ok(with_revision(revision, Json(json!({ "revision": revision, "params": params }))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackBody {
    fps: Option<f64>,
}

async fn post_track(State(state): State<Arc<AppState>>, body: axum::body::Bytes) -> ApiResult {
    let body: TrackBody = match parse_body(&body) {
        Ok(b) => b,
        Err(e) => return Err(fail(&state, e).await),
    };
    let (sb, inputs, revision) = {
        let s = state.session.read().await;
        let Some(sb) = s.storyboard.clone() else {
            return Err(with_revision(s.revision, ApiError::new(StatusCode::CONFLICT, "no storyboard; simulate first")));
        };
        (sb, Arc::clone(&s.inputs), s.revision)
    };
    let config = PlaybackConfig {
        fps: body.fps.unwrap_or(PlaybackConfig::default().fps),
        lead_time: sb.config.params.lead_time,
        noise_seed: sb.config.seed,
        ..Default::default()
    };
    let result = blocking(move || {
        execute(&sb, &inputs.scene, &inputs.timeline, &inputs.grids, &config).map(|t| export_track(&t, TrackFormat::Csv))
    })
    .await;
    match result {
        Ok(csv) => Ok(with_revision(revision, ([(header::CONTENT_TYPE, "text/csv")], csv))),
        Err(e) => Err(with_revision(revision, ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))),
    }
}

/// Writes `storyboard.json` and previews to the project output directory.
async fn post_save(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult {
    let _guard = begin_mutation(&state, &headers).await?;
    let mut s = state.session.write().await;
    let Some(sb) = s.storyboard.clone() else {
        return Err(with_revision(s.revision, ApiError::new(StatusCode::CONFLICT, "no storyboard; simulate first")));
    };
    if let Err(e) = s.project.save_outputs(&sb, None) {
        return Err(with_revision(s.revision, ApiError::from(e)));
    }
    s.revision += 1;
    s.dirty = false;
    let revision = s.revision;
    let path = s.project.storyboard_path().display().to_string();
    Ok(with_revision(revision, Json(json!({ "revision": revision, "path": path }))))
}

fn local_origin(origin: &HeaderValue) -> bool {
    let Ok(o) = origin.to_str() else {
        return false;
    };
    ["http://localhost", "http://127.0.0.1", "http://[::1]"].iter().any(|prefix| {
        o.strip_prefix(prefix)
            .is_some_and(|rest| rest.is_empty() || (rest.starts_with(':') && rest[1..].bytes().all(|b| b.is_ascii_digit())))
    })
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|origin, _| local_origin(origin)))
        .allow_methods([Method::GET, Method::POST, Method::PATCH, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE, HeaderName::from_static(IF_REVISION_HEADER)])
        .expose_headers([HeaderName::from_static(REVISION_HEADER)]);
    Router::new()
        .route("/health", get(health))
        .route("/project", get(get_project))
        .route("/storyboard", get(get_storyboard))
        .route("/preview/{marker_id}", get(get_preview))
        .route("/simulate", post(post_simulate))
        .route("/resimulate", post(post_resimulate))
        .route("/markers/{marker_id}/lock", post(post_lock))
        .route("/params", patch(patch_params))
        .route("/track", post(post_track))
        .route("/save", post(post_save))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

/// Blocking entry point for the command line: loads the project and serves
/// it on localhost until the process is stopped.
pub fn run(config_path: &Path, port: u16) -> Result<(), Box<dyn std::error::Error>> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let state = AppState::load(config_path)?;
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    eprintln!("serving {} on http://{addr}", config_path.display());
    runtime.block_on(serve(state, addr))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_local_origins_are_allowed() {
        for ok in ["http://localhost", "http://localhost:5173", "http://127.0.0.1:8080"] {
            assert!(local_origin(&HeaderValue::from_static(ok)), "{ok}");
        }
        for bad in ["http://localhost.evil.com", "https://example.com", "http://127.0.0.1:80x"] {
            assert!(!local_origin(&HeaderValue::from_static(bad)), "{bad}");
        }
    }
}
