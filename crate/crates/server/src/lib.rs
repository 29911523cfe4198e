//! HTTP and server-sent-event facade over the broker, scene and asset store.
//!
//! | Route | Method | Body | Response |
//! |---|---|---|---|
//! | `/scene` | GET | | canonical scene JSON |
//! | `/instructions` | POST | instruction JSON | `{job_id, applied, object_id}` |
//! | `/jobs` | GET | | job list |
//! | `/jobs/{id}` | GET | | job |
//! | `/jobs/{id}/variant` | POST | `{"index": n}` | job |
//! | `/snapshot` | POST | `{"camera": {..}, "prompt": ".."}` | `{job_id}` |
//! | `/offline/run` | POST | | `{processed}` |
//! | `/assets/{id}` | GET | | asset bytes |
//! | `/events` | GET | | `data:` lines of event JSON |
//!
//! Errors are `{code, message}` with a matching status.

use std::convert::Infallible;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::header::{CACHE_CONTROL, CONTENT_TYPE};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::oneshot;

use splatwright::assets::{AssetError, AssetId};
use splatwright::broker::{Broker, BrokerError, GenerationJob};
use splatwright::render::{Camera, RenderError};

#[derive(Clone)]
pub struct AppState {
    pub broker: Arc<Broker>,
}

/// Error body `{code, message}` with its HTTP status.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

impl From<BrokerError> for ApiError {
    fn from(e: BrokerError) -> Self {
        use BrokerError::*;
        let (status, code) = match &e {
            ObjectNotFound(_) => (StatusCode::NOT_FOUND, "object_not_found"),
            UnknownJob(_) => (StatusCode::NOT_FOUND, "unknown_job"),
            Malformed(_) => (StatusCode::BAD_REQUEST, "malformed_instruction"),
            StaleVariant(_) => (StatusCode::CONFLICT, "stale_variant"),
            DuplicateObjectId(_) => (StatusCode::CONFLICT, "duplicate_object_id"),
            IllegalTransition { .. } => (StatusCode::CONFLICT, "illegal_transition"),
            WrongState { .. } => (StatusCode::CONFLICT, "wrong_state"),
            BadIndex(_) => (StatusCode::BAD_REQUEST, "bad_index"),
            EmptyPrompt => (StatusCode::BAD_REQUEST, "empty_prompt"),
            Render(RenderError::MissingAsset(_)) | Asset(AssetError::Missing(_)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "missing_asset")
            }
            Render(_) => (StatusCode::UNPROCESSABLE_ENTITY, "render_error"),
            Asset(_) => (StatusCode::INTERNAL_SERVER_ERROR, "asset_error"),
            Generation(_) => (StatusCode::BAD_GATEWAY, "generation_error"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_json", e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(broker: Arc<Broker>) -> Router {
    Router::new()
        .route("/scene", get(get_scene))
        .route("/instructions", post(post_instruction))
        .route("/jobs", get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/variant", post(post_variant))
        .route("/snapshot", post(post_snapshot))
        .route("/offline/run", post(run_offline))
        .route("/assets/{id}", get(get_asset))
        .route("/events", get(events))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(AppState { broker })
}

async fn get_scene(State(app): State<AppState>) -> Response {
    let scene = app.broker.scene();
    ([(CONTENT_TYPE, "application/json")], scene.to_canonical_json()).into_response()
}

async fn post_instruction(State(app): State<AppState>, body: Result<Json<Value>, JsonRejection>) -> ApiResult<Json<Value>> {
    let Json(value) = body?;
    let out = app.broker.submit_json(value)?;
    Ok(Json(json!({ "job_id": out.job_id, "applied": out.applied, "object_id": out.object_id })))
}

async fn list_jobs(State(app): State<AppState>) -> Json<Vec<GenerationJob>> {
    Json(app.broker.jobs())
}

async fn get_job(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<GenerationJob>> {
    app.broker
        .job(&id)
        .map(Json)
        .ok_or_else(|| BrokerError::UnknownJob(id).into())
}

#[derive(Deserialize)]
struct VariantBody {
    index: u64,
}

async fn post_variant(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<VariantBody>, JsonRejection>,
) -> ApiResult<Json<GenerationJob>> {
    let Json(body) = body?;
    let index = u8::try_from(body.index).map_err(|_| BrokerError::BadIndex(u8::MAX))?;
    app.broker.select_variant(&id, index)?;
    get_job(State(app), Path(id)).await
}

#[derive(Deserialize)]
struct SnapshotBody {
    camera: Camera,
    prompt: String,
}

async fn post_snapshot(State(app): State<AppState>, body: Result<Json<SnapshotBody>, JsonRejection>) -> ApiResult<Json<Value>> {
    let Json(body) = body?;
    let job_id = app.broker.magic_camera_snapshot(&body.camera, &body.prompt)?;
    Ok(Json(json!({ "job_id": job_id })))
}

async fn run_offline(State(app): State<AppState>) -> ApiResult<Json<Value>> {
    let broker = app.broker.clone();
    let processed = tokio::task::spawn_blocking(move || broker.run_offline_once())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "offline_panicked", e.to_string()))?;
    Ok(Json(json!({ "processed": processed })))
}

async fn get_asset(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let asset = app.broker.assets().get(&AssetId(id)).map_err(|e| match e {
        AssetError::Missing(_) => ApiError::new(StatusCode::NOT_FOUND, "asset_not_found", e.to_string()),
        other => BrokerError::Asset(other).into(),
    })?;
    let headers = [
        (CONTENT_TYPE, asset.media.mime()),
        (CACHE_CONTROL, "public, max-age=31536000, immutable"),
    ];
    Ok((headers, asset.bytes.as_ref().clone()).into_response())
}

async fn events(State(app): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = app.broker.events().subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let msg = rx.recv().await?;
        let data = serde_json::to_string(&msg).expect("event serializes");
        Some((Ok(Event::default().data(data)), rx))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

/// Serves on `listener` until the future completes with an error.
pub async fn serve(listener: tokio::net::TcpListener, broker: Arc<Broker>) -> io::Result<()> {
    axum::serve(listener, router(broker)).await
}

/// A server running on its own runtime thread.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(broker: Arc<Broker>, addr: SocketAddr) -> io::Result<ServerHandle> {
        let std_listener = std::net::TcpListener::bind(addr)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        let thread = thread::Builder::new().name("http".into()).spawn(move || {
            let result = rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)?;
                tokio::select! {
                    r = serve(listener, broker) => r,
                    _ = stopped => Ok(()),
                }
            });
            rt.shutdown_timeout(Duration::from_secs(1));
            result
        })?;
        Ok(ServerHandle {
            addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use splatwright::assets::AssetId;
    use splatwright::genmod::GenError;
    use splatwright::scene::ObjectId;

    #[test]
    fn broker_errors_map_to_status_and_code() {
        let cases: Vec<(BrokerError, u16, &str)> = vec![
            (BrokerError::ObjectNotFound(ObjectId::from("x")), 404, "object_not_found"),
            (BrokerError::BadIndex(7), 400, "bad_index"),
            (BrokerError::EmptyPrompt, 400, "empty_prompt"),
            (BrokerError::Render(RenderError::MissingAsset(AssetId("a".into()))), 422, "missing_asset"),
            (BrokerError::Asset(AssetError::Missing(AssetId("a".into()))), 422, "missing_asset"),
            (BrokerError::Render(RenderError::InvalidCamera), 422, "render_error"),
            (BrokerError::Generation(GenError::BackendUnavailable("down".into())), 502, "generation_error"),
        ];
        for (err, status, code) in cases {
            let message = err.to_string();
            let api = ApiError::from(err);
            assert_eq!((api.status.as_u16(), api.code), (status, code));
            assert_eq!(api.message, message);
        }
    }

    #[test]
    fn error_body_has_code_and_message() {
        let resp = ApiError::new(StatusCode::CONFLICT, "wrong_state", "job is Completed").into_response();
        assert_eq!(resp.status(), StatusCode::CONFLICT);
        assert_eq!(resp.headers()[CONTENT_TYPE], "application/json");
    }
}
