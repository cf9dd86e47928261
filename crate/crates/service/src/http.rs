//! HTTP routes and the server-sent event stream.

use crate::protocol::{
    BoundaryPrediction, CreateSession, EditResponse, ErrorBody, ExportRequest, MoveVertex, PredictRequest,
    PredictResponse, PredictedMode, SessionFile, SetMode, StartOptimization,
};
use crate::registry::Service;
use crate::{Error, SCHEMA_VERSION};
use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::StatusCode;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use coldbend_core::geometry::compact::compact_encode;
use coldbend_core::geometry::schema::BoundaryDoc;
use coldbend_core::P3;
use coldbend_surrogate::{select, Criterion};
use futures_util::stream::Stream;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;
use tokio::sync::broadcast::error::RecvError;

impl IntoResponse for Error {
    fn into_response(self) -> Response {
        let (code, kind) = match &self {
            Error::Mesh(_) => (StatusCode::UNPROCESSABLE_ENTITY, "mesh"),
            Error::Invalid(_) | Error::Core(coldbend_core::Error::Invalid(_) | coldbend_core::Error::Format(_)) => {
                (StatusCode::BAD_REQUEST, "invalid")
            }
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Busy(_) => (StatusCode::CONFLICT, "busy"),
            Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "numerical"),
        };
        let issues = if let Error::Mesh(i) = &self { i.clone() } else { Vec::new() };
        let body = ErrorBody { schema: SCHEMA_VERSION, kind: kind.into(), message: self.to_string(), issues };
        (code, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, Error>;

/// JSON request body whose parse failures become structured errors.
struct Body<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = Error;

    async fn from_request(req: Request, state: &S) -> Result<Self, Error> {
        Json::<T>::from_request(req, state).await.map(|Json(v)| Body(v)).map_err(|e| Error::Invalid(e.body_text()))
    }
}

/// Runs blocking session work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> crate::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| Error::Invalid(format!("worker failed: {e}")))?.map(Json)
}

#[derive(Deserialize)]
struct SnapshotQuery {
    #[serde(default)]
    tessellate: bool,
}

#[derive(Deserialize)]
struct PollQuery {
    #[serde(default)]
    since: usize,
}

#[derive(Deserialize)]
struct LoadRequest {
    file: SessionFile,
    #[serde(default)]
    model: Option<String>,
}

async fn create(State(svc): State<Arc<Service>>, Body(req): Body<CreateSession>) -> ApiResult<crate::protocol::Snapshot> {
    blocking(move || svc.create(req)?.snapshot(false)).await
}

async fn load(State(svc): State<Arc<Service>>, Body(req): Body<LoadRequest>) -> ApiResult<crate::protocol::Snapshot> {
    blocking(move || svc.load(req.file, req.model.as_deref())?.snapshot(false)).await
}

async fn snapshot(
    State(svc): State<Arc<Service>>,
    Path(id): Path<u64>,
    Query(q): Query<SnapshotQuery>,
) -> ApiResult<crate::protocol::Snapshot> {
    blocking(move || svc.get(id)?.snapshot(q.tessellate)).await
}

async fn delete(State(svc): State<Arc<Service>>, Path(id): Path<u64>) -> Result<StatusCode, Error> {
    svc.remove(id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn file(State(svc): State<Arc<Service>>, Path(id): Path<u64>) -> ApiResult<SessionFile> {
    Ok(Json(svc.get(id)?.file()?))
}

async fn export(
    State(svc): State<Arc<Service>>,
    Path(id): Path<u64>,
    Body(req): Body<ExportRequest>,
) -> ApiResult<crate::protocol::ExportResponse> {
    blocking(move || svc.get(id)?.export(req.what)).await
}

async fn subdivide(State(svc): State<Arc<Service>>, Path(id): Path<u64>) -> ApiResult<crate::protocol::Snapshot> {
    blocking(move || svc.get(id)?.subdivide()).await
}

async fn move_vertex(
    State(svc): State<Arc<Service>>,
    Path(id): Path<u64>,
    Body(req): Body<MoveVertex>,
) -> ApiResult<EditResponse> {
    blocking(move || {
        let p = req.position;
        let result = svc.get(id)?.move_vertex(req.vertex, P3::new(p[0], p[1], p[2]))?;
        Ok(EditResponse { schema: SCHEMA_VERSION, session: id, result })
    })
    .await
}

async fn set_mode(State(svc): State<Arc<Service>>, Path(id): Path<u64>, Body(req): Body<SetMode>) -> ApiResult<EditResponse> {
    blocking(move || {
        let result = svc.get(id)?.set_mode(req.face, req.mode)?;
        Ok(EditResponse { schema: SCHEMA_VERSION, session: id, result })
    })
    .await
}

async fn predict_session(State(svc): State<Arc<Service>>, Path(id): Path<u64>) -> ApiResult<crate::protocol::Snapshot> {
    blocking(move || svc.get(id)?.snapshot(true)).await
}

/// Predicts admissible panels for explicit boundaries.
pub fn predict_boundaries(svc: &Service, req: &PredictRequest) -> crate::Result<PredictResponse> {
    let (model, _) = svc.model(req.model.as_deref())?;
    let boundaries = req.boundaries.iter().map(BoundaryDoc::boundary).collect::<coldbend_core::Result<Vec<_>>>()?;
    let encoded = boundaries.iter().map(compact_encode).collect::<coldbend_core::Result<Vec<_>>>()?;
    let ps: Vec<[f64; 18]> = encoded.iter().map(|e| e.compact.p).collect();
    let preds = if ps.is_empty() { Vec::new() } else { model.predict(&ps)? };
    let mut out = Vec::with_capacity(ps.len());
    for ((b, e), pred) in boundaries.iter().zip(&encoded).zip(preds) {
        let sel = select(&pred, &Criterion::MinStress);
        let mut modes = Vec::new();
        let frame = e.canonical.frame()?;
        for (component, m) in &sel.modes {
            // interior controls from the canonical frame back to the caller's labeling
            let mut interior: [P3; 4] =
                std::array::from_fn(|k| frame.to_world(&P3::new(m.shape[3 * k], m.shape[3 * k + 1], m.shape[3 * k + 2])));
            if e.info.transposed {
                interior.swap(1, 2);
            }
            modes.push(PredictedMode { component: *component, pi: m.pi, sigma: m.sigma, panel: BoundaryDoc::new(b, Some(&interior)) });
        }
        out.push(BoundaryPrediction { in_domain: model.in_domain(&e.compact.p), modes, best: sel.best });
    }
    Ok(PredictResponse { schema: SCHEMA_VERSION, predictions: out })
}

async fn predict(State(svc): State<Arc<Service>>, Body(req): Body<PredictRequest>) -> ApiResult<PredictResponse> {
    blocking(move || predict_boundaries(&svc, &req)).await
}

async fn start(
    State(svc): State<Arc<Service>>,
    Path(id): Path<u64>,
    body: Bytes,
) -> ApiResult<crate::protocol::PollResponse> {
    let h = svc.get(id)?;
    let config = if body.is_empty() {
        Default::default()
    } else {
        serde_json::from_slice::<StartOptimization>(&body).map_err(|e| Error::Invalid(e.to_string()))?.config
    };
    h.start(config)?;
    Ok(Json(h.poll(0)?))
}

async fn stop(State(svc): State<Arc<Service>>, Path(id): Path<u64>) -> ApiResult<crate::protocol::PollResponse> {
    let h = svc.get(id)?;
    h.stop()?;
    Ok(Json(h.poll(0)?))
}

async fn poll(
    State(svc): State<Arc<Service>>,
    Path(id): Path<u64>,
    Query(q): Query<PollQuery>,
) -> ApiResult<crate::protocol::PollResponse> {
    Ok(Json(svc.get(id)?.poll(q.since)?))
}

async fn events(
    State(svc): State<Arc<Service>>,
    Path(id): Path<u64>,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, Error> {
    let rx = svc.get(id)?.subscribe();
    let stream = futures_util::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(e) => {
                    let name = match &e {
                        crate::protocol::Event::Predictions { .. } => "predictions",
                        crate::protocol::Event::Iteration(_) => "iteration",
                        crate::protocol::Event::Status { .. } => "status",
                    };
                    let data = serde_json::to_string(&e).expect("event serializes");
                    return Some((Ok(SseEvent::default().event(name).data(data)), rx));
                }
                // a slow client skips the updates it missed
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "schema": SCHEMA_VERSION, "status": "ok" }))
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/session", post(create))
        .route("/session/load", post(load))
        .route("/session/{id}", get(snapshot).delete(delete))
        .route("/session/{id}/file", get(file))
        .route("/session/{id}/export", post(export))
        .route("/session/{id}/events", get(events))
        .route("/mesh/{id}/subdivide", post(subdivide))
        .route("/mesh/{id}/move_vertex", post(move_vertex))
        .route("/mesh/{id}/mode", post(set_mode))
        .route("/predict", post(predict))
        .route("/predict/{id}", get(predict_session))
        .route("/optimize/{id}/start", post(start))
        .route("/optimize/{id}/stop", post(stop))
        .route("/optimize/{id}/poll", get(poll))
        .with_state(svc)
}

/// Serves until the process ends.
pub async fn serve(addr: SocketAddr, svc: Arc<Service>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(svc)).await
}
