//! Snapshot-consistent render and edit service over one hair model.
//!
//! Every edit produces a new immutable [`Snapshot`]; renders hold an `Arc`
//! to the snapshot they started on, so they never observe a partial edit.
//! Edits run one at a time; a second edit arriving while one is applied is
//! rejected with 409.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ghair_core::camera::CameraView;
use ghair_core::edit::{render_image, EditCommand, RenderMode};
use ghair_core::model::{HairModel, ScatterParams};
use ghair_core::raster::{LightPassConfig, RenderConfig};
use ghair_core::scatter::LightSource;
use ghair_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const VERSION_HEADER: &str = "x-snapshot-version";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub undo_depth: usize,
    /// Longest image side rendered unless the request sets `full`.
    pub preview_cap: u32,
    pub render: RenderConfig,
    pub light_pass: LightPassConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            undo_depth: 32,
            preview_cap: 512,
            render: RenderConfig::default(),
            light_pass: LightPassConfig::default(),
        }
    }
}

#[derive(Debug)]
pub struct Snapshot {
    pub version: u64,
    pub model: Arc<HairModel>,
    pub params: ScatterParams,
    pub lights: Vec<LightSource>,
}

enum Phase {
    Loading,
    Failed(String),
    Ready {
        current: Arc<Snapshot>,
        history: VecDeque<Arc<Snapshot>>,
    },
}

pub struct Salon {
    cfg: ServiceConfig,
    phase: RwLock<Phase>,
    edits: tokio::sync::Mutex<()>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn bad(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn with_field(mut self, f: impl Into<String>) -> Self {
        self.field = Some(f.into());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = Value::String(f);
        }
        (self.status, Json(body)).into_response()
    }
}

/// Name of the camera field an error refers to, when there is one.
fn camera_field(e: &CoreError) -> Option<String> {
    let name = match e {
        CoreError::MissingField(f) => f.clone(),
        CoreError::NonRigid(_) => "world_to_camera".into(),
        CoreError::InvalidCamera(m) => {
            let first = m.split_whitespace().next().unwrap_or("");
            match first {
                "fx" | "fy" | "world_to_camera" => first.into(),
                "principal" => "cx".into(),
                "image" => "width".into(),
                _ => return None,
            }
        }
        _ => return None,
    };
    Some(format!("camera.{name}"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    pub camera: Value,
    #[serde(default)]
    pub lights: Option<Vec<LightSource>>,
    #[serde(default)]
    pub params: Option<ScatterParams>,
    #[serde(default)]
    pub mode: RenderMode,
    /// Snapshot the client expects to render.
    #[serde(default)]
    pub version: Option<u64>,
    /// With `version`: fail with 409 instead of rendering a newer snapshot.
    #[serde(default)]
    pub strict: bool,
    /// Render at the camera's own size even above the preview cap.
    #[serde(default)]
    pub full: bool,
}

impl Salon {
    /// A service that answers 503 until a model is installed.
    pub fn loading(cfg: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            cfg,
            phase: RwLock::new(Phase::Loading),
            edits: tokio::sync::Mutex::new(()),
        })
    }

    pub fn with_model(cfg: ServiceConfig, model: HairModel, params: ScatterParams, lights: Vec<LightSource>) -> Arc<Self> {
        let s = Self::loading(cfg);
        s.install(model, params, lights);
        s
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    /// Replace whatever is loaded with a fresh snapshot (version 1 on first
    /// install, otherwise the next version).
    pub fn install(&self, model: HairModel, params: ScatterParams, lights: Vec<LightSource>) {
        let mut phase = self.phase.write().unwrap();
        let version = match &*phase {
            Phase::Ready { current, .. } => current.version + 1,
            _ => 1,
        };
        *phase = Phase::Ready {
            current: Arc::new(Snapshot {
                version,
                model: Arc::new(model),
                params,
                lights,
            }),
            history: VecDeque::new(),
        };
    }

    pub fn fail(&self, message: String) {
        *self.phase.write().unwrap() = Phase::Failed(message);
    }

    /// Load a GHAIR file on the blocking pool.
    pub fn spawn_load(self: &Arc<Self>, path: PathBuf, params: ScatterParams, lights: Vec<LightSource>) -> tokio::task::JoinHandle<()> {
        let me = self.clone();
        tokio::task::spawn_blocking(move || match ghair_core::io::ghair::read(&path) {
            Ok(m) => me.install(m, params, lights),
            Err(e) => {
                log::error!("loading {}: {e}", path.display());
                me.fail(e.to_string());
            }
        })
    }

    pub fn current(&self) -> Result<Arc<Snapshot>, ApiError> {
        match &*self.phase.read().unwrap() {
            Phase::Ready { current, .. } => Ok(current.clone()),
            Phase::Loading => Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "model is loading")),
            Phase::Failed(m) => Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, format!("model failed to load: {m}"))),
        }
    }

    /// Hold this to keep edits out; concurrent edits answer 409 meanwhile.
    pub async fn lock_edits(&self) -> tokio::sync::MutexGuard<'_, ()> {
        self.edits.lock().await
    }

    fn commit(&self, next: impl FnOnce(&Snapshot) -> Result<Snapshot, ApiError>, undo: bool) -> Result<u64, ApiError> {
        let snap = self.current()?;
        let mut new = next(&snap)?;
        let mut phase = self.phase.write().unwrap();
        let Phase::Ready { current, history } = &mut *phase else {
            return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "model is loading"));
        };
        new.version = current.version + 1;
        let old = std::mem::replace(current, Arc::new(new));
        if !undo {
            history.push_back(old);
            while history.len() > self.cfg.undo_depth {
                history.pop_front();
            }
        }
        Ok(current.version)
    }

    pub fn apply_edit(&self, cmd: &EditCommand) -> Result<u64, ApiError> {
        self.commit(
            |s| {
                let mut model = (*s.model).clone();
                let mut params = s.params.clone();
                let mut lights = s.lights.clone();
                cmd.apply(&mut model, &mut params, &mut lights).map_err(|e| ApiError::bad(e.to_string()))?;
                Ok(Snapshot {
                    version: 0,
                    model: Arc::new(model),
                    params,
                    lights,
                })
            },
            false,
        )
    }

    /// Re-publish the state before the last edit under a new version.
    pub fn undo(&self) -> Result<u64, ApiError> {
        let prev = {
            let mut phase = self.phase.write().unwrap();
            match &mut *phase {
                Phase::Ready { history, .. } => history.pop_back(),
                _ => None,
            }
        };
        let prev = prev.ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "nothing to undo"))?;
        self.commit(
            |_| {
                Ok(Snapshot {
                    version: 0,
                    model: prev.model.clone(),
                    params: prev.params.clone(),
                    lights: prev.lights.clone(),
                })
            },
            true,
        )
    }

    /// Render a parsed request against the current snapshot. Returns the
    /// PNG bytes and the snapshot version.
    pub fn render(&self, req: &RenderRequest) -> Result<(Vec<u8>, u64), ApiError> {
        let snap = self.current()?;
        if let (Some(v), true) = (req.version, req.strict) {
            if v != snap.version {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    format!("snapshot {v} superseded by {}", snap.version),
                ));
            }
        }
        let mut cam = CameraView::from_json(&req.camera).map_err(|e| {
            let f = camera_field(&e);
            let err = ApiError::bad(format!("camera: {e}"));
            match f {
                Some(f) => err.with_field(f),
                None => err,
            }
        })?;
        if let Err(e) = cam.validate() {
            let err = ApiError::bad(format!("camera: {e}"));
            return Err(match camera_field(&e) {
                Some(f) => err.with_field(f),
                None => err,
            });
        }
        let side = cam.width.max(cam.height);
        if !req.full && side > self.cfg.preview_cap {
            cam = cam.rescaled(self.cfg.preview_cap as f64 / side as f64);
        }
        let params = req.params.as_ref().unwrap_or(&snap.params);
        params.validate().map_err(|e| ApiError::bad(format!("params: {e}")).with_field("params"))?;
        let lights = req.lights.as_deref().unwrap_or(&snap.lights);
        for l in lights {
            l.validate().map_err(|e| ApiError::bad(format!("lights: {e}")).with_field("lights"))?;
        }
        let frame = render_image(&snap.model, &cam, req.mode, lights, params, &self.cfg.render, &self.cfg.light_pass).map_err(|e| match e {
            CoreError::LightInsideBounds { .. } => ApiError::bad(e.to_string()).with_field("lights"),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        })?;
        let png = frame.png_bytes().map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        Ok((png, snap.version))
    }

    pub fn info(&self) -> Result<Value, ApiError> {
        let s = self.current()?;
        let m = &s.model;
        let bounds = m.bounds().map(|(lo, hi)| json!({ "min": [lo.x, lo.y, lo.z], "max": [hi.x, hi.y, hi.z] }));
        Ok(json!({
            "version": s.version,
            "strand_count": m.strands.len(),
            "nodes_per_strand": m.nodes_per_strand(),
            "segment_count": m.segment_count(),
            "head_gaussians": m.head.len(),
            "sh_degree": m.sh_degree,
            "bounds": bounds,
            "params": s.params,
            "lights": s.lights,
        }))
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad(format!("invalid request body: {e}")))
}

async fn healthz(State(s): State<Arc<Salon>>) -> Json<Value> {
    let status = match &*s.phase.read().unwrap() {
        Phase::Loading => json!({ "status": "loading" }),
        Phase::Failed(m) => json!({ "status": "failed", "error": m }),
        Phase::Ready { current, .. } => json!({ "status": "ok", "version": current.version }),
    };
    Json(status)
}

async fn info(State(s): State<Arc<Salon>>) -> Result<Json<Value>, ApiError> {
    s.info().map(Json)
}

async fn render(State(s): State<Arc<Salon>>, body: Bytes) -> Result<Response, ApiError> {
    let req: RenderRequest = parse(&body)?;
    let (png, version) = tokio::task::spawn_blocking(move || s.render(&req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let mut resp = png.into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    h.insert(VERSION_HEADER, HeaderValue::from(version));
    Ok(resp)
}

fn version_response(v: u64) -> Response {
    let mut resp = Json(json!({ "version": v })).into_response();
    resp.headers_mut().insert(VERSION_HEADER, HeaderValue::from(v));
    resp
}

async fn edit(State(s): State<Arc<Salon>>, body: Bytes) -> Result<Response, ApiError> {
    let cmd: EditCommand = parse(&body)?;
    let Ok(_guard) = s.edits.try_lock() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "another edit is in flight"));
    };
    let s2 = s.clone();
    let v = tokio::task::spawn_blocking(move || s2.apply_edit(&cmd))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(version_response(v))
}

async fn undo(State(s): State<Arc<Salon>>) -> Result<Response, ApiError> {
    let Ok(_guard) = s.edits.try_lock() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "another edit is in flight"));
    };
    s.undo().map(version_response)
}

pub fn router(salon: Arc<Salon>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/model/info", get(info))
        .route("/render", post(render))
        .route("/edit", post(edit))
        .route("/undo", post(undo))
        .with_state(salon)
}

/// Serve until Ctrl-C.
pub async fn serve(salon: Arc<Salon>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(salon))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
