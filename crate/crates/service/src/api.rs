use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use contact_core::contact::{CameraExtrinsics, EffectorPoses, PointCloud};
use contact_core::prediction::PixelPoint;
use contact_core::session::{
    random_target, FrameBundle, Phase, Pipeline, PracticeError, PracticeReply, PracticeTrial, Session, SessionError,
    SessionEvent, SessionSnapshot,
};
use contact_core::vision::ImageRef;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

/// Largest accepted upload: a full-HD cloud in text form fits comfortably.
const UPLOAD_LIMIT: usize = 512 * 1024 * 1024;

type Shared<T> = RwLock<HashMap<String, Arc<Mutex<T>>>>;

/// Sessions and practice trials. Each entry has its own async mutex, which
/// hands out the lock in arrival order.
pub struct AppState {
    pipeline: Arc<Pipeline>,
    sessions: Shared<Session>,
    trials: Shared<PracticeTrial>,
}

impl AppState {
    pub fn new(pipeline: Pipeline) -> Arc<Self> {
        Arc::new(Self {
            pipeline: Arc::new(pipeline),
            sessions: RwLock::default(),
            trials: RwLock::default(),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let map = self.sessions.read().unwrap_or_else(|p| p.into_inner());
        map.get(id).cloned().ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    fn trial(&self, id: &str) -> Result<Arc<Mutex<PracticeTrial>>, ApiError> {
        let map = self.trials.read().unwrap_or_else(|p| p.into_inner());
        map.get(id).cloned().ok_or_else(|| ApiError::NotFound(format!("no practice trial {id}")))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::EmptyUtterance => ApiError::BadRequest(e.to_string()),
            SessionError::Executing | SessionError::NotExecuting => ApiError::Conflict(e.to_string()),
        }
    }
}

impl From<PracticeError> for ApiError {
    fn from(e: PracticeError) -> Self {
        match e {
            PracticeError::BudgetExhausted | PracticeError::Stopped => ApiError::Conflict(e.to_string()),
            PracticeError::EmptyUtterance | PracticeError::TargetOutside { .. } => ApiError::BadRequest(e.to_string()),
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(format!("worker failed: {e}")))
}

/// Multipart fields by name, plus the file name sent with each.
struct Form(HashMap<String, (Option<String>, Bytes)>);

impl Form {
    async fn read(mut multipart: Multipart) -> Result<Self, ApiError> {
        let mut fields = HashMap::new();
        while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::BadRequest(e.to_string()))? {
            let name = field.name().unwrap_or_default().to_string();
            let file_name = field.file_name().map(str::to_string);
            let data = field.bytes().await.map_err(|e| ApiError::BadRequest(e.to_string()))?;
            fields.insert(name, (file_name, data));
        }
        Ok(Self(fields))
    }

    fn bytes(&self, name: &str) -> Option<&Bytes> {
        self.0.get(name).map(|(_, b)| b)
    }

    fn require(&self, name: &str) -> Result<&Bytes, ApiError> {
        self.bytes(name).ok_or_else(|| ApiError::BadRequest(format!("missing form field {name:?}")))
    }

    fn text(&self, name: &str) -> Result<Option<String>, ApiError> {
        self.bytes(name)
            .map(|b| String::from_utf8(b.to_vec()).map_err(|_| ApiError::BadRequest(format!("{name} is not UTF-8"))))
            .transpose()
    }

    fn number(&self, name: &str) -> Result<Option<u32>, ApiError> {
        self.text(name)?
            .map(|t| t.trim().parse().map_err(|_| ApiError::BadRequest(format!("{name} must be a pixel index"))))
            .transpose()
    }

    /// Image id: explicit `image_id` field, else the uploaded file's stem.
    /// Vision fixtures are keyed by it.
    fn image(&self) -> Result<ImageRef, ApiError> {
        let png = self.require("image")?;
        let id = match self.text("image_id")? {
            Some(id) => id,
            None => self.0["image"]
                .0
                .as_deref()
                .and_then(|f| Path::new(f).file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into()),
        };
        ImageRef::from_png_bytes(id, png).map_err(|e| ApiError::BadRequest(format!("image: {e}")))
    }
}

#[derive(Serialize)]
struct Created {
    id: String,
}

#[derive(Serialize)]
struct SessionSummary {
    id: String,
    phase: Phase,
    image: String,
}

#[derive(Deserialize)]
pub struct UtteranceBody {
    pub text: String,
}

#[derive(Serialize)]
struct PracticeView {
    id: String,
    remaining_budget: usize,
    finished: bool,
    on_target: bool,
    image: contact_core::session::ImageInfo,
    #[serde(flatten)]
    trial: PracticeTrial,
}

impl PracticeView {
    fn of(id: String, trial: &PracticeTrial) -> Self {
        Self {
            id,
            remaining_budget: trial.remaining_budget(),
            finished: trial.finished(),
            on_target: trial.on_target(),
            image: contact_core::session::ImageInfo {
                id: trial.image().id().to_string(),
                width: trial.image().width(),
                height: trial.image().height(),
            },
            trial: trial.clone(),
        }
    }
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn create_session(State(state): State<Arc<AppState>>, multipart: Multipart) -> Result<Response, ApiError> {
    let form = Form::read(multipart).await?;
    let id = uuid::Uuid::new_v4().to_string();
    let session = blocking(move || -> Result<Session, ApiError> {
        let image = form.image()?;
        let cloud = PointCloud::from_bytes(form.require("cloud")?).map_err(|e| ApiError::BadRequest(format!("cloud: {e}")))?;
        let extrinsics = form
            .text("extrinsics")?
            .ok_or_else(|| ApiError::BadRequest("missing form field \"extrinsics\"".into()))?;
        let extrinsics =
            CameraExtrinsics::from_json(&extrinsics).map_err(|e| ApiError::BadRequest(format!("extrinsics: {e}")))?;
        let poses = match form.text("poses")? {
            Some(text) => serde_json::from_str::<EffectorPoses>(&text)
                .map_err(|e| ApiError::BadRequest(format!("poses: {e}")))?,
            None => EffectorPoses::default(),
        };
        let frame =
            FrameBundle::new(image, cloud, extrinsics, poses).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        Ok(Session::new(id, frame))
    })
    .await??;
    let id = session.id().to_string();
    tracing::info!(session = %id, image = session.frame().image().id(), "session created");
    state
        .sessions
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(Created { id })).into_response())
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<Vec<SessionSummary>> {
    let entries: Vec<_> = state
        .sessions
        .read()
        .unwrap_or_else(|p| p.into_inner())
        .values()
        .cloned()
        .collect();
    let mut out = Vec::with_capacity(entries.len());
    for entry in entries {
        let s = entry.lock().await;
        out.push(SessionSummary {
            id: s.id().to_string(),
            phase: s.phase(),
            image: s.frame().image().id().to_string(),
        });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionSnapshot>, ApiError> {
    let session = state.session(&id)?;
    let snapshot = session.lock().await.snapshot();
    Ok(Json(snapshot))
}

async fn session_image(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let image = session.lock().await.frame().image().clone();
    Ok(png(blocking(move || image.to_png_bytes()).await?))
}

async fn post_utterance(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<UtteranceBody>,
) -> Result<Json<SessionEvent>, ApiError> {
    let session = state.session(&id)?;
    let mut guard = session.lock_owned().await;
    let pipeline = state.pipeline.clone();
    let event = blocking(move || guard.handle_utterance(&pipeline, &body.text)).await??;
    tracing::info!(session = %id, kind = ?event.kind, phase = %event.phase, "utterance handled");
    Ok(Json(event))
}

async fn complete_task(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionSnapshot>, ApiError> {
    let session = state.session(&id)?;
    let mut guard = session.lock().await;
    guard.finish_execution()?;
    Ok(Json(guard.snapshot()))
}

async fn create_trial(State(state): State<Arc<AppState>>, multipart: Multipart) -> Result<Response, ApiError> {
    let form = Form::read(multipart).await?;
    let id = uuid::Uuid::new_v4().to_string();
    let trial = blocking(move || -> Result<PracticeTrial, ApiError> {
        let image = form.image()?;
        let target = match (form.number("target_u")?, form.number("target_v")?) {
            (Some(u), Some(v)) => PixelPoint::new(u, v),
            (None, None) => random_target(&mut rand::rng(), image.width(), image.height()),
            _ => return Err(ApiError::BadRequest("give both target_u and target_v or neither".into())),
        };
        Ok(PracticeTrial::new(image, target)?)
    })
    .await??;
    let view = PracticeView::of(id.clone(), &trial);
    state
        .trials
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .insert(id, Arc::new(Mutex::new(trial)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_trial(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let trial = state.trial(&id)?;
    let view = PracticeView::of(id, &*trial.lock().await);
    Ok(Json(view).into_response())
}

async fn trial_image(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let trial = state.trial(&id)?;
    let image = trial.lock().await.image().clone();
    Ok(png(blocking(move || image.to_png_bytes()).await?))
}

async fn trial_utterance(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<UtteranceBody>,
) -> Result<Json<PracticeReply>, ApiError> {
    let trial = state.trial(&id)?;
    let mut guard = trial.lock_owned().await;
    let pipeline = state.pipeline.clone();
    let reply = blocking(move || guard.prompt(&pipeline, &body.text)).await??;
    Ok(Json(reply))
}

/// All API routes; static console assets are served from `static_dir` for
/// every other path when given.
pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/image", get(session_image))
        .route("/sessions/{id}/utterance", post(post_utterance))
        .route("/sessions/{id}/complete", post(complete_task))
        .route("/practice", post(create_trial))
        .route("/practice/{id}", get(get_trial))
        .route("/practice/{id}/image", get(trial_image))
        .route("/practice/{id}/utterance", post(trial_utterance))
        .layer(DefaultBodyLimit::max(UPLOAD_LIMIT))
        .layer(TraceLayer::new_for_http())
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
