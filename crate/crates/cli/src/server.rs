//! REST service for the rectification UI.
//!
//! Reads go straight to the output and evidence trees. Corrections are
//! validated and stored as `manual/{k}/{n}.json`; a rectify request runs the
//! second round for one frame at a time per frame.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use labelfuse4d::energy::FusionWeights;
use labelfuse4d::evidence::RectificationOverlay;
use labelfuse4d::label::LabelEntry;
use labelfuse4d::pipeline::{output_paths, FrameSummary, OutputPaths};
use labelfuse4d::{DirEvidence, SequenceManifest, SequenceRunner, Toggles, ViewRig};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::commands::JobConfig;

pub struct AppState {
    pub manifest: SequenceManifest,
    pub evidence: DirEvidence,
    pub weights: FusionWeights,
    pub toggles: Toggles,
    pub out: OutputPaths,
    pub rig: ViewRig,
    busy: Mutex<BTreeSet<usize>>,
}

impl AppState {
    /// Builds the rig once up front; it only depends on the first frame.
    pub fn new(cfg: JobConfig) -> anyhow::Result<Self> {
        let evidence = DirEvidence::from_manifest(&cfg.manifest);
        let rig = SequenceRunner::new(&cfg.manifest, &evidence, cfg.weights, cfg.toggles, &cfg.out)?
            .pipeline
            .rig;
        Ok(AppState {
            out: output_paths(cfg.out),
            manifest: cfg.manifest,
            evidence,
            weights: cfg.weights,
            toggles: cfg.toggles,
            rig,
            busy: Mutex::new(BTreeSet::new()),
        })
    }

    /// Claims frame `k` for a rectify job; `None` while another one holds it.
    pub fn claim(self: &Arc<Self>, k: usize) -> Option<BusyGuard> {
        let fresh = self.busy.lock().expect("busy set poisoned").insert(k);
        fresh.then(|| BusyGuard {
            state: self.clone(),
            frame: k,
        })
    }

    fn is_busy(&self, k: usize) -> bool {
        self.busy.lock().expect("busy set poisoned").contains(&k)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn internal(err: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            warn!(error = %self.message, "request failed");
        }
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/frames", get(list_frames))
        .route("/frames/{k}/views/{n}/rgb.png", get(rgb_png))
        .route("/frames/{k}/views/{n}/labels.png", get(labels_png))
        .route("/frames/{k}/views/{n}/masks.json", get(masks_json))
        .route(
            "/frames/{k}/views/{n}/corrections",
            post(post_corrections).get(get_corrections),
        )
        .route("/frames/{k}/rectify", post(rectify))
        .route("/registry", get(registry))
        .with_state(state)
}

fn check_frame(state: &AppState, k: usize) -> ApiResult<()> {
    match state.manifest.frame(k) {
        Some(_) => Ok(()),
        None => Err(ApiError::not_found(format!("no frame {k}"))),
    }
}

fn check_view(state: &AppState, k: usize, n: usize) -> ApiResult<()> {
    check_frame(state, k)?;
    if n >= state.rig.len() {
        return Err(ApiError::not_found(format!(
            "no view {n}; the rig has {}",
            state.rig.len()
        )));
    }
    Ok(())
}

async fn read_file(path: PathBuf, content_type: &'static str) -> ApiResult<Response> {
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(ApiError::not_found(format!("{} does not exist", path.display())))
        }
        Err(e) => Err(ApiError::internal(e)),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FrameStatus {
    pub frame: usize,
    /// Round-1 labels are on disk.
    pub processed: bool,
    /// Round-2 labels are on disk.
    pub rectified: bool,
    /// Views with a stored correction overlay.
    pub corrections: Vec<usize>,
    pub busy: bool,
}

fn frame_status(state: &AppState, k: usize) -> FrameStatus {
    FrameStatus {
        frame: k,
        processed: state.out.labels(k, false).is_file(),
        rectified: state.out.labels(k, true).is_file(),
        corrections: (0..state.rig.len())
            .filter(|&n| state.evidence.path("manual", k, n).is_file())
            .collect(),
        busy: state.is_busy(k),
    }
}

async fn list_frames(State(state): State<Arc<AppState>>) -> Json<Vec<FrameStatus>> {
    Json(
        state
            .manifest
            .frames
            .iter()
            .map(|f| frame_status(&state, f.index))
            .collect(),
    )
}

async fn rgb_png(State(state): State<Arc<AppState>>, UrlPath((k, n)): UrlPath<(usize, usize)>) -> ApiResult<Response> {
    check_view(&state, k, n)?;
    read_file(state.out.render_rgb(k, n), "image/png").await
}

async fn labels_png(
    State(state): State<Arc<AppState>>,
    UrlPath((k, n)): UrlPath<(usize, usize)>,
) -> ApiResult<Response> {
    check_view(&state, k, n)?;
    read_file(state.out.final_render_label(k, n), "image/png").await
}

async fn masks_json(
    State(state): State<Arc<AppState>>,
    UrlPath((k, n)): UrlPath<(usize, usize)>,
) -> ApiResult<Response> {
    check_view(&state, k, n)?;
    read_file(state.evidence.path("masks", k, n), "application/json").await
}

async fn get_corrections(
    State(state): State<Arc<AppState>>,
    UrlPath((k, n)): UrlPath<(usize, usize)>,
) -> ApiResult<Response> {
    check_view(&state, k, n)?;
    let path = state.evidence.path("manual", k, n);
    if !path.is_file() {
        return Ok(([(header::CONTENT_TYPE, "application/json")], "[]").into_response());
    }
    read_file(path, "application/json").await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorrectionReceipt {
    pub frame: usize,
    pub view: usize,
    pub entries: usize,
}

async fn post_corrections(
    State(state): State<Arc<AppState>>,
    UrlPath((k, n)): UrlPath<(usize, usize)>,
    body: Bytes,
) -> ApiResult<Json<CorrectionReceipt>> {
    check_view(&state, k, n)?;
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let overlay = RectificationOverlay::from_json(text).map_err(ApiError::bad_request)?;
    let (w, h) = state.rig.image_size();
    overlay
        .validate(w, h, &state.manifest.registry)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let path = state.evidence.path("manual", k, n);
    overlay.save(&path).map_err(ApiError::internal)?;
    info!(frame = k, view = n, entries = overlay.len(), "stored corrections");
    Ok(Json(CorrectionReceipt {
        frame: k,
        view: n,
        entries: overlay.len(),
    }))
}

#[derive(Debug, Default, Deserialize)]
pub struct RectifyQuery {
    #[serde(default)]
    pub propagate: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RectifyResponse {
    pub frame: usize,
    pub rectified: bool,
    pub frames: Vec<FrameSummary>,
    /// Label render URL of every view of the frame.
    pub renders: Vec<String>,
}

/// Marks a frame as being rectified until dropped.
pub struct BusyGuard {
    state: Arc<AppState>,
    frame: usize,
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        if let Ok(mut set) = self.state.busy.lock() {
            set.remove(&self.frame);
        }
    }
}

fn run_rectify(state: &AppState, k: usize, propagate: bool) -> ApiResult<Vec<FrameSummary>> {
    let out_root: &Path = &state.out.root;
    let runner = SequenceRunner::new(&state.manifest, &state.evidence, state.weights, state.toggles, out_root)
        .map_err(ApiError::internal)?;
    runner.rectify(k, propagate).map_err(|e| match e {
        labelfuse4d::Error::PixelOutOfBounds { .. }
        | labelfuse4d::Error::UnknownLabel(_)
        | labelfuse4d::Error::Parse { .. } => ApiError::bad_request(e.to_string()),
        other => ApiError::internal(other),
    })
}

async fn rectify(
    State(state): State<Arc<AppState>>,
    UrlPath(k): UrlPath<usize>,
    Query(query): Query<RectifyQuery>,
) -> ApiResult<Json<RectifyResponse>> {
    check_frame(&state, k)?;
    if !state.out.labels(k, false).is_file() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("frame {k} has not been processed yet"),
        ));
    }
    if k > 1 && !state.out.labels(k - 1, false).is_file() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("frame {} has not been processed yet", k - 1),
        ));
    }
    let Some(guard) = state.claim(k) else {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("frame {k} is already being rectified"),
        ));
    };
    let propagate = query.propagate;
    let task_state = state.clone();
    let frames = tokio::task::spawn_blocking(move || {
        let _guard = guard;
        run_rectify(&task_state, k, propagate)
    })
    .await
    .map_err(ApiError::internal)??;
    let rectified = frames.first().is_some_and(|f| f.rectified);
    Ok(Json(RectifyResponse {
        frame: k,
        rectified,
        frames,
        renders: (0..state.rig.len())
            .map(|n| format!("/frames/{k}/views/{n}/labels.png"))
            .collect(),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegistryResponse {
    pub labels: Vec<LabelEntry>,
    pub background_color: [u8; 3],
    pub views: usize,
    pub width: usize,
    pub height: usize,
}

async fn registry(State(state): State<Arc<AppState>>) -> Json<RegistryResponse> {
    let reg = &state.manifest.registry;
    let (width, height) = state.rig.image_size();
    Json(RegistryResponse {
        labels: reg.entries().to_vec(),
        background_color: reg.background_color(),
        views: state.rig.len(),
        width,
        height,
    })
}

pub async fn serve(state: Arc<AppState>, host: &str, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
