//! Blocking client for the flowcascade HTTP service.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;

use flowcascade::api::{
    BenchReport, BenchRequest, ClassifyRequest, ClassifyResponse, DecisionRecord, ErrorBody, EvalRequest,
    EvalResponse, LoadModelRequest, ModelInfo, PrepareRequest, PrepareResponse, SelectKRequest, SelectKResponse,
    TrainRequest, TrainResponse,
};
use flowcascade::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{message}")]
    Service { status: u16, kind: String, message: String },
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
}

impl ClientError {
    /// True when the service blamed the request (status 4xx).
    pub fn is_input_error(&self) -> bool {
        matches!(self, ClientError::Service { status, .. } if (400..500).contains(status))
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

pub struct Client {
    base: String,
    http: reqwest::blocking::Client,
}

impl Client {
    /// `base` is e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Result<Self> {
        let http = reqwest::blocking::Client::builder().timeout(None).build()?;
        Ok(Client {
            base: base.into().trim_end_matches('/').to_string(),
            http,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn decode<T: DeserializeOwned>(resp: reqwest::blocking::Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json()?);
        }
        let code = status.as_u16();
        let text = resp.text().unwrap_or_default();
        Err(match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => ClientError::Service {
                status: code,
                kind: body.kind,
                message: body.error,
            },
            Err(_) => ClientError::Service {
                status: code,
                kind: if code < 500 { "input" } else { "internal" }.into(),
                message: format!("HTTP {code}: {text}"),
            },
        })
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        Self::decode(self.http.post(self.url(path)).json(body).send()?)
    }

    pub fn health(&self) -> Result<bool> {
        Ok(self.http.get(self.url("/health")).send()?.status().is_success())
    }

    pub fn prepare(&self, req: &PrepareRequest) -> Result<PrepareResponse> {
        self.post("/v1/prepare", req)
    }

    pub fn train(&self, config: &RunConfig) -> Result<TrainResponse> {
        self.post("/v1/train", &TrainRequest { config: config.clone() })
    }

    pub fn load_model(&self, path: impl Into<PathBuf>) -> Result<ModelInfo> {
        self.post("/v1/models/load", &LoadModelRequest { path: path.into() })
    }

    pub fn models(&self) -> Result<Vec<ModelInfo>> {
        Self::decode(self.http.get(self.url("/v1/models")).send()?)
    }

    pub fn eval(&self, req: &EvalRequest) -> Result<EvalResponse> {
        self.post("/v1/eval", req)
    }

    pub fn classify(&self, model_id: &str, lines: Vec<String>, first_id: u64) -> Result<Vec<DecisionRecord>> {
        let resp: ClassifyResponse = self.post(
            "/v1/classify",
            &ClassifyRequest {
                model_id: model_id.to_string(),
                lines,
                first_id,
            },
        )?;
        Ok(resp.decisions)
    }

    pub fn bench(&self, req: &BenchRequest) -> Result<BenchReport> {
        self.post("/v1/bench", req)
    }

    pub fn select_k(&self, req: &SelectKRequest) -> Result<SelectKResponse> {
        self.post("/v1/select-k", req)
    }
}
