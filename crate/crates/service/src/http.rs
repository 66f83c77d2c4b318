//! Routes:
//!
//! ```text
//! POST   /sessions                    create
//! GET    /sessions/{id}               state snapshot
//! DELETE /sessions/{id}
//! POST   /sessions/{id}/strokes       apply a stroke
//! PUT    /sessions/{id}/weights       {"wb": [5 values]}
//! PUT    /sessions/{id}/settings      K, tag filter, auto-update
//! POST   /sessions/{id}/clear         blank canvas
//! POST   /sessions/{id}/convert       compute and push now
//! GET    /sessions/{id}/shadow        JSON, or ?format=pgm
//! GET    /sessions/{id}/synthesis     JSON (?raw=true adds pre-clamp values), or ?format=pgm
//! POST   /sessions/{id}/export        {"path": "relative/dir"} under the export root
//! GET    /sessions/{id}/live          WebSocket push channel
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::sync::broadcast::error::RecvError;
use uuid::Uuid;

use crate::session::{SessionManager, Snapshot};
use crate::wire::*;
use crate::ServiceError;
use facemanifold::Stroke;

#[derive(Clone)]
pub struct AppState {
    pub manager: Arc<SessionManager>,
    pub export_root: Arc<PathBuf>,
}

impl AppState {
    pub fn new(manager: SessionManager, export_root: PathBuf) -> Self {
        Self {
            manager: Arc::new(manager),
            export_root: Arc::new(export_root),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        use facemanifold::Error as E;
        let status = match &self {
            ServiceError::NoStore => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Core(
                E::InvalidInput(_) | E::OutOfRange(_) | E::DimensionMismatch { .. } | E::NonFinite(_) | E::Corrupt(_),
            ) => StatusCode::BAD_REQUEST,
            ServiceError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorResponse { error: self.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

fn parse_id(raw: &str) -> ApiResult<Uuid> {
    // an id that is not even a UUID cannot name a session
    Uuid::parse_str(raw).map_err(|_| ServiceError::BadRequest(format!("malformed session id {raw:?}")))
}

/// Runs CPU-bound session work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::BadRequest(format!("worker failed: {e}")))?
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/strokes", post(post_stroke))
        .route("/sessions/{id}/weights", put(put_weights))
        .route("/sessions/{id}/settings", put(put_settings))
        .route("/sessions/{id}/clear", post(post_clear))
        .route("/sessions/{id}/convert", post(post_convert))
        .route("/sessions/{id}/shadow", get(get_shadow))
        .route("/sessions/{id}/synthesis", get(get_synthesis))
        .route("/sessions/{id}/export", post(post_export))
        .route("/sessions/{id}/live", get(live))
        .with_state(state)
}

async fn create_session(State(st): State<AppState>, body: Option<Json<CreateSessionRequest>>) -> ApiResult<Response> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let m = st.manager.clone();
    let (id, snap) = blocking(move || {
        let id = m.create(req.into())?;
        Ok((id, m.snapshot(id)?))
    })
    .await?;
    let body = CreateSessionResponse {
        id: id.to_string(),
        revision: snap.revision,
        k: snap.k,
        width: snap.canvas.width(),
        height: snap.canvas.height(),
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionStateResponse>> {
    let id = parse_id(&id)?;
    let snap = st.manager.snapshot(id)?;
    Ok(Json(SessionStateResponse::new(id.to_string(), &snap)))
}

async fn delete_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    st.manager.remove(parse_id(&id)?)?;
    Ok(StatusCode::NO_CONTENT)
}

/// Applies a mutation, then recomputes and pushes if the session is in
/// auto-update mode.
async fn mutate(
    st: AppState,
    id: Uuid,
    f: impl FnOnce(&SessionManager, Uuid) -> ApiResult<Snapshot> + Send + 'static,
) -> ApiResult<Json<RevisionResponse>> {
    let m = st.manager.clone();
    let revision = blocking(move || {
        let snap = f(&m, id)?;
        m.refresh_if_auto(id, &snap)?;
        Ok(snap.revision)
    })
    .await?;
    Ok(Json(RevisionResponse { revision }))
}

async fn post_stroke(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<StrokeRequest>,
) -> ApiResult<Json<RevisionResponse>> {
    let id = parse_id(&id)?;
    let stroke = Stroke::from(&req);
    mutate(st, id, move |m, id| m.apply_stroke(id, &stroke)).await
}

async fn put_weights(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<WeightsRequest>,
) -> ApiResult<Json<RevisionResponse>> {
    let id = parse_id(&id)?;
    mutate(st, id, move |m, id| m.set_weights(id, req.wb)).await
}

async fn put_settings(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SettingsRequest>,
) -> ApiResult<Json<RevisionResponse>> {
    let id = parse_id(&id)?;
    mutate(st, id, move |m, id| m.update_settings(id, req.into())).await
}

async fn post_clear(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RevisionResponse>> {
    let id = parse_id(&id)?;
    mutate(st, id, |m, id| m.clear(id)).await
}

async fn post_convert(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RevisionResponse>> {
    let id = parse_id(&id)?;
    let m = st.manager.clone();
    let r = blocking(move || m.current_result(id)).await?;
    Ok(Json(RevisionResponse { revision: r.revision }))
}

#[derive(Debug, Default, Deserialize)]
pub struct ResultQuery {
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    raw: Option<bool>,
}

fn pgm_response(bytes: Vec<u8>, revision: u64) -> Response {
    let mut resp = bytes.into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/x-portable-graymap"));
    h.insert("x-revision", HeaderValue::from(revision));
    resp
}

fn want_pgm(q: &ResultQuery) -> ApiResult<bool> {
    match q.format.as_deref() {
        None | Some("json") => Ok(false),
        Some("pgm") => Ok(true),
        Some(f) => Err(ServiceError::BadRequest(format!("unknown format {f:?}"))),
    }
}

async fn get_shadow(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ResultQuery>,
) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    let pgm = want_pgm(&q)?;
    let m = st.manager.clone();
    let r = blocking(move || m.current_result(id)).await?;
    Ok(if pgm {
        pgm_response(r.shadow.composite.to_pgm(), r.revision)
    } else {
        Json(ShadowResponse::new(r.revision, &r.shadow)).into_response()
    })
}

async fn get_synthesis(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ResultQuery>,
) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    let pgm = want_pgm(&q)?;
    let m = st.manager.clone();
    let r = blocking(move || m.current_result(id)).await?;
    Ok(if pgm {
        pgm_response(r.synthesis.reconstruction.preview.to_pgm(), r.revision)
    } else {
        Json(SynthesisResponse::new(&r.synthesis, q.raw.unwrap_or(false))).into_response()
    })
}

async fn post_export(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ExportRequest>,
) -> ApiResult<Json<ExportResponse>> {
    let id = parse_id(&id)?;
    let m = st.manager.clone();
    let root = st.export_root.clone();
    let (revision, files) = blocking(move || {
        let revision = m.snapshot(id)?.revision;
        Ok((revision, m.export(id, &root, &req.path)?))
    })
    .await?;
    Ok(Json(ExportResponse {
        revision,
        files: files.iter().map(|p| p.display().to_string()).collect(),
    }))
}

async fn live(State(st): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    // subscribe before upgrading so no update between the two is missed
    let rx = st.manager.subscribe(id)?;
    let revision = st.manager.snapshot(id)?.revision;
    Ok(ws.on_upgrade(move |socket| live_session(st, id, socket, rx, revision)))
}

fn to_text(msg: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(msg).expect("messages serialize").into())
}

async fn live_session(
    st: AppState,
    id: Uuid,
    socket: WebSocket,
    mut rx: tokio::sync::broadcast::Receiver<Arc<crate::SessionResult>>,
    revision: u64,
) {
    let (mut tx, mut incoming) = socket.split();
    let (out_tx, mut out_rx) = tokio::sync::mpsc::channel::<Message>(32);
    let _ = out_tx.send(to_text(&ServerMessage::Hello { revision })).await;

    let writer = tokio::spawn(async move {
        while let Some(m) = out_rx.recv().await {
            if tx.send(m).await.is_err() {
                break;
            }
        }
    });

    let push_tx = out_tx.clone();
    let pusher = tokio::spawn(async move {
        let mut last = None;
        loop {
            match rx.recv().await {
                Ok(r) => {
                    // updates can only go forward
                    if last.is_some_and(|l| r.revision <= l) {
                        continue;
                    }
                    last = Some(r.revision);
                    let msg = tokio::task::spawn_blocking(move || to_text(&ServerMessage::update(&r)))
                        .await
                        .expect("serialization task");
                    if push_tx.send(msg).await.is_err() {
                        break;
                    }
                }
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => break,
            }
        }
    });

    while let Some(Ok(msg)) = incoming.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match serde_json::from_str::<ClientMessage>(&text) {
            Ok(cmd) => handle_client(&st, id, cmd).await,
            Err(e) => ServerMessage::Error {
                message: format!("bad message: {e}"),
            },
        };
        if out_tx.send(to_text(&reply)).await.is_err() {
            break;
        }
    }
    pusher.abort();
    drop(out_tx);
    let _ = writer.await;
}

async fn handle_client(st: &AppState, id: Uuid, cmd: ClientMessage) -> ServerMessage {
    let m = st.manager.clone();
    let result = blocking(move || {
        let snap = match cmd {
            ClientMessage::Stroke(s) => m.apply_stroke(id, &Stroke::from(&s))?,
            ClientMessage::Weights(w) => m.set_weights(id, w.wb)?,
            ClientMessage::Convert => return Ok(m.current_result(id)?.revision),
        };
        m.refresh_if_auto(id, &snap)?;
        Ok(snap.revision)
    })
    .await;
    match result {
        Ok(revision) => ServerMessage::Ack { revision },
        Err(e) => ServerMessage::Error { message: e.to_string() },
    }
}
