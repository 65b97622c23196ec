//! HTTP and WebSocket routes.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;
use voxelink_core::annotation::{composite_overlay, StrokeLogEntry};
use voxelink_core::cache::DEFAULT_CACHE_CAPACITY;
use voxelink_core::imaging::{rgba_png, slice_png};
use voxelink_core::mesh::io::{obj_string, stl_bytes, wire_bytes};
use voxelink_core::stack::{list_stack_dir, load_mask_stack, load_tiff_stack};
use voxelink_core::volume::DEFAULT_SPACING;
use voxelink_core::{AnnotationError, Axis, MaskVolume, SliceRef, Window};

use crate::error::ServiceError;
use crate::pipeline::{export_all, PipelineConfig};
use crate::session::{MeshLookup, Session};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub cache_slices: usize,
    pub pipeline: PipelineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            cache_slices: DEFAULT_CACHE_CAPACITY,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Defaults, with `VOXELINK_CACHE_SLICES` applied when set.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Some(n) = std::env::var("VOXELINK_CACHE_SLICES").ok().and_then(|v| v.parse().ok()) {
            cfg.cache_slices = n;
        }
        cfg
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.inner
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/slice", get(get_slice))
        .route("/sessions/{id}/strokes", post(post_stroke))
        .route("/sessions/{id}/undo", post(post_undo))
        .route("/sessions/{id}/redo", post(post_redo))
        .route("/sessions/{id}/mesh", get(get_mesh))
        .route("/sessions/{id}/export", post(post_export))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub stack_dir: PathBuf,
    pub spacing: Option<[f64; 3]>,
    pub window: Option<[f64; 2]>,
    pub mask_dir: Option<PathBuf>,
    pub iso_level: Option<f64>,
    pub keep_ratio: Option<f64>,
    pub yield_interval: Option<usize>,
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<Response, ServiceError> {
    let req: CreateSession = parse_json(&body)?;
    let mut pipeline = app.inner.config.pipeline;
    if let Some(iso) = req.iso_level {
        pipeline.mc.iso_level = iso;
    }
    if let Some(k) = req.keep_ratio {
        pipeline.decimation.target_ratio = k;
    }
    if let Some(y) = req.yield_interval {
        pipeline.mc.yield_interval = y;
    }
    pipeline.validate()?;
    let (volume, mask) = tokio::task::spawn_blocking(move || -> Result<_, ServiceError> {
        let window = req.window.map(|[c, w]| Window::new(c, w)).transpose()?;
        let paths = list_stack_dir(&req.stack_dir)?;
        let volume = load_tiff_stack(&paths, req.spacing.unwrap_or(DEFAULT_SPACING), window)?;
        let mask = match &req.mask_dir {
            Some(dir) => load_mask_stack(&list_stack_dir(dir)?, volume.dims())?,
            None => MaskVolume::for_volume(&volume),
        };
        Ok((volume, mask))
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::start(id.clone(), volume, mask, pipeline, app.inner.config.cache_slices)?;
    let info = session.info();
    app.inner
        .sessions
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .insert(id, session);
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn session_info(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(app.session(&id)?.info()).into_response())
}

#[derive(Debug, Deserialize)]
pub struct SliceQuery {
    pub axis: Option<String>,
    pub index: usize,
    #[serde(default)]
    pub overlay: bool,
    pub alpha: Option<f64>,
    /// Overlay color as `rrggbb` hex.
    pub color: Option<String>,
}

pub const DEFAULT_OVERLAY_ALPHA: f64 = 0.4;
pub const DEFAULT_OVERLAY_COLOR: [u8; 3] = [255, 64, 64];

fn parse_color(hex: &str) -> Result<[u8; 3], ServiceError> {
    let hex = hex.trim_start_matches('#');
    let bad = || ServiceError::BadRequest(format!("color {hex:?} is not rrggbb hex"));
    if hex.len() != 6 || !hex.is_ascii() {
        return Err(bad());
    }
    let mut out = [0u8; 3];
    for (i, c) in out.iter_mut().enumerate() {
        *c = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
    }
    Ok(out)
}

async fn get_slice(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SliceQuery>,
) -> Result<Response, ServiceError> {
    let session = app.session(&id)?;
    let axis: Axis = q.axis.as_deref().unwrap_or("axial").parse()?;
    let slice = SliceRef::new(axis, q.index);
    let png = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, ServiceError> {
        let image = session.slice(slice)?;
        if !q.overlay {
            return Ok(slice_png(&image));
        }
        let color = q.color.as_deref().map(parse_color).transpose()?.unwrap_or(DEFAULT_OVERLAY_COLOR);
        let labels = session.mask_slice(slice)?;
        let rgba = composite_overlay(&image, &labels, color, q.alpha.unwrap_or(DEFAULT_OVERLAY_ALPHA))?;
        Ok(rgba_png(&rgba))
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn post_stroke(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let session = app.session(&id)?;
    let entry: StrokeLogEntry = serde_json::from_slice(&body).map_err(|e| AnnotationError::Schema {
        line: 1,
        reason: e.to_string(),
    })?;
    let out = tokio::task::spawn_blocking(move || session.apply_stroke(&entry))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(out).into_response())
}

async fn post_undo(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(app.session(&id)?.undo()).into_response())
}

async fn post_redo(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(app.session(&id)?.redo()).into_response())
}

#[derive(Debug, Deserialize)]
pub struct MeshQuery {
    pub distance: Option<f64>,
    pub format: Option<String>,
}

async fn get_mesh(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<MeshQuery>,
) -> Result<Response, ServiceError> {
    let session = app.session(&id)?;
    let format = q.format.unwrap_or_else(|| "stl".into());
    if !matches!(format.as_str(), "stl" | "obj" | "wire") {
        return Err(ServiceError::BadRequest(format!("unknown mesh format {format:?}")));
    }
    let distance = q.distance.unwrap_or(0.0);
    if !distance.is_finite() || distance < 0.0 {
        return Err(ServiceError::BadRequest(format!("distance {distance} must be finite and >= 0")));
    }
    let (job_id, level, ladder) = match session.mesh(distance) {
        MeshLookup::Pending { job_id } => {
            let body = json!({ "status": "pending", "job_id": job_id });
            return Ok((StatusCode::ACCEPTED, Json(body)).into_response());
        }
        MeshLookup::Ready { job_id, level, ladder } => (job_id, level, ladder),
    };
    let encoded = tokio::task::spawn_blocking(move || {
        let mesh = &ladder.levels[level].mesh;
        match format.as_str() {
            "obj" => ("text/plain; charset=utf-8", obj_string(mesh).into_bytes()),
            "wire" => ("application/octet-stream", wire_bytes(mesh)),
            _ => ("model/stl", stl_bytes(mesh)),
        }
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))?;
    let (content_type, bytes) = encoded;
    Ok((
        [
            (header::CONTENT_TYPE, content_type.to_string()),
            (header::HeaderName::from_static("x-voxelink-job"), job_id.to_string()),
            (header::HeaderName::from_static("x-voxelink-lod"), level.to_string()),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportRequest {
    pub directory: PathBuf,
}

async fn post_export(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let session = app.session(&id)?;
    let req: ExportRequest = parse_json(&body)?;
    // the snapshot is taken now, so later edits do not leak into this export
    let mask = session.mask_snapshot();
    let manifest = tokio::task::spawn_blocking(move || {
        export_all(session.volume(), &mask, session.config(), &req.directory).map(|(m, _)| m)
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(manifest).into_response())
}

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub replay: bool,
}

async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    let session = app.session(&id)?;
    Ok(ws.on_upgrade(move |socket| stream_events(socket, session, q.replay)))
}

async fn stream_events(mut socket: WebSocket, session: Arc<Session>, replay: bool) {
    let (past, mut rx) = session.subscribe(replay);
    drop(session);
    for event in past {
        if send_event(&mut socket, &event).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            ev = rx.recv() => match ev {
                Ok(event) => {
                    if send_event(&mut socket, &event).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(n)) => tracing::warn!("event socket lagged by {n} events"),
                Err(RecvError::Closed) => return,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn send_event(socket: &mut WebSocket, event: &crate::session::JobEvent) -> Result<(), axum::Error> {
    let text = serde_json::to_string(event).expect("job events always serialize");
    socket.send(Message::Text(text.into())).await
}
