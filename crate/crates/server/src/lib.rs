//! HTTP/JSON front end for the detector.
//!
//! Every route runs the matching operation from `flowcascade::ops` on a
//! blocking thread. Trained or loaded models are kept in memory and
//! addressed by `model_id`, the first 16 hex digits of the model file's
//! SHA-256.
//!
//! | method | path               | body                | reply            |
//! |--------|--------------------|---------------------|------------------|
//! | GET    | `/health`          |                     | `"ok"`           |
//! | POST   | `/v1/prepare`      | `PrepareRequest`    | `PrepareResponse`|
//! | POST   | `/v1/train`        | `TrainRequest`      | `TrainResponse`  |
//! | POST   | `/v1/models/load`  | `LoadModelRequest`  | `ModelInfo`      |
//! | GET    | `/v1/models`       |                     | `[ModelInfo]`    |
//! | POST   | `/v1/eval`         | `EvalRequest`       | `EvalResponse`   |
//! | POST   | `/v1/classify`     | `ClassifyRequest`   | `ClassifyResponse`|
//! | POST   | `/v1/bench`        | `BenchRequest`      | `BenchReport`    |
//! | POST   | `/v1/select-k`     | `SelectKRequest`    | `SelectKResponse`|
//!
//! Failures come back as `ErrorBody` with 400 (bad input), 404 (unknown
//! model) or 500.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::sync::RwLock;

use flowcascade::api::{
    BenchReport, BenchRequest, ClassifyRequest, ClassifyResponse, ErrorBody, EvalRequest, EvalResponse,
    LoadModelRequest, ModelInfo, PrepareRequest, PrepareResponse, SelectKRequest, SelectKResponse, TrainRequest,
    TrainResponse,
};
use flowcascade::{ops, CascadeModel};

/// Request bodies can carry large classify batches.
const BODY_LIMIT: usize = 256 * 1024 * 1024;

struct Entry {
    model: Arc<CascadeModel>,
    info: ModelInfo,
}

#[derive(Clone, Default)]
pub struct AppState {
    models: Arc<RwLock<BTreeMap<String, Entry>>>,
}

impl AppState {
    async fn insert(&self, model: CascadeModel, info: ModelInfo) {
        self.models.write().await.insert(
            info.model_id.clone(),
            Entry {
                model: Arc::new(model),
                info,
            },
        );
    }

    async fn get(&self, id: &str) -> Result<Arc<CascadeModel>, ApiError> {
        self.models
            .read()
            .await
            .get(id)
            .map(|e| e.model.clone())
            .ok_or_else(|| ApiError {
                status: StatusCode::NOT_FOUND,
                body: ErrorBody {
                    error: format!("no model with id {id} is loaded"),
                    kind: "input".into(),
                },
            })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl From<flowcascade::Error> for ApiError {
    fn from(e: flowcascade::Error) -> Self {
        let (status, kind) = if e.is_input_error() {
            (StatusCode::BAD_REQUEST, "input")
        } else {
            (StatusCode::INTERNAL_SERVER_ERROR, "internal")
        };
        ApiError {
            status,
            body: ErrorBody {
                error: e.to_string(),
                kind: kind.into(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> flowcascade::Result<T> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(join) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody {
                error: format!("worker failed: {join}"),
                kind: "internal".into(),
            },
        }),
    }
}

async fn health() -> &'static str {
    "ok"
}

async fn prepare(Json(req): Json<PrepareRequest>) -> ApiResult<PrepareResponse> {
    blocking(move || ops::prepare(&req.train, &req.test, req.taxonomy.as_deref(), &req.out))
        .await
        .map(Json)
}

async fn train(State(state): State<AppState>, Json(req): Json<TrainRequest>) -> ApiResult<TrainResponse> {
    let (model, resp) = blocking(move || ops::train(&req.config)).await?;
    state.insert(model, resp.model.clone()).await;
    Ok(Json(resp))
}

async fn load_model(State(state): State<AppState>, Json(req): Json<LoadModelRequest>) -> ApiResult<ModelInfo> {
    let (model, info) = blocking(move || {
        let bytes = std::fs::read(&req.path).map_err(|e| flowcascade::Error::Io {
            path: req.path.clone(),
            source: e,
        })?;
        let model = CascadeModel::from_bytes(&bytes)?;
        let info = ops::model_info(&model, &bytes, Some(&req.path));
        Ok((model, info))
    })
    .await?;
    state.insert(model, info.clone()).await;
    Ok(Json(info))
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<ModelInfo>> {
    Json(state.models.read().await.values().map(|e| e.info.clone()).collect())
}

async fn eval(State(state): State<AppState>, Json(req): Json<EvalRequest>) -> ApiResult<EvalResponse> {
    let model = state.get(&req.model_id).await?;
    blocking(move || ops::evaluate(&model, &req.test, req.baselines_train.as_deref()))
        .await
        .map(Json)
}

async fn classify(State(state): State<AppState>, Json(req): Json<ClassifyRequest>) -> ApiResult<ClassifyResponse> {
    let model = state.get(&req.model_id).await?;
    blocking(move || {
        Ok(ClassifyResponse {
            decisions: ops::classify_lines(&model, &req.lines, req.first_id),
        })
    })
    .await
    .map(Json)
}

async fn select_k(Json(req): Json<SelectKRequest>) -> ApiResult<SelectKResponse> {
    blocking(move || ops::select_k(&req)).await.map(Json)
}

async fn bench(State(state): State<AppState>, Json(req): Json<BenchRequest>) -> ApiResult<BenchReport> {
    let model = state.get(&req.model_id).await?;
    blocking(move || ops::bench(&model, req.flows, req.workers, req.seed))
        .await
        .map(Json)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/prepare", post(prepare))
        .route("/v1/train", post(train))
        .route("/v1/models/load", post(load_model))
        .route("/v1/models", get(list_models))
        .route("/v1/eval", post(eval))
        .route("/v1/classify", post(classify))
        .route("/v1/bench", post(bench))
        .route("/v1/select-k", post(select_k))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::default())).await
}

/// A server running on its own runtime thread; stops when the process
/// exits.
pub struct Background {
    pub addr: SocketAddr,
}

impl Background {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

/// Binds `addr` (use port 0 for an ephemeral port) and serves on a
/// dedicated thread with its own runtime.
pub fn spawn(addr: SocketAddr) -> std::io::Result<Background> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    std::thread::Builder::new()
        .name("flowcascade-server".into())
        .spawn(move || {
            runtime.block_on(async move {
                let listener = TcpListener::from_std(std_listener).expect("listener");
                let _ = serve(listener).await;
            })
        })?;
    Ok(Background { addr })
}
