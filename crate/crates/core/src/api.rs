//! JSON request/response bodies exchanged between the detector service and
//! its clients.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cascade::{BaselineReport, EvalReport, Prediction};
use crate::config::RunConfig;
use crate::dataset::{CensusPair, LAYER_COUNT};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepareRequest {
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareResponse {
    pub out: PathBuf,
    pub train_records: usize,
    pub test_records: usize,
    pub census: CensusPair,
    pub census_text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRequest {
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub path: Option<PathBuf>,
    pub sha256: String,
    pub bytes: u64,
    pub layers: Vec<String>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub model: ModelInfo,
    pub train_records: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadModelRequest {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRequest {
    pub model_id: String,
    /// Prepared cache directory, or a labeled NSL-KDD file.
    pub test: PathBuf,
    /// Labeled training file; when set the standalone kNN / H-ELM baselines
    /// are trained and scored too.
    #[serde(default)]
    pub baselines_train: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub report: EvalReport,
    pub baselines: Option<BaselineReport>,
    pub text: String,
    pub csv: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub model_id: String,
    /// Raw CSV rows: 41 attributes, optionally followed by label and
    /// difficulty.
    pub lines: Vec<String>,
    /// Record id assigned to `lines[0]`; later lines count up from it.
    #[serde(default = "one")]
    pub first_id: u64,
}

fn one() -> u64 {
    1
}

/// One line of the decision stream. Exactly one of `category` and `error`
/// is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<Prediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<[Option<f64>; LAYER_COUNT]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub decisions: Vec<DecisionRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRequest {
    pub model_id: String,
    pub flows: usize,
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub flows: usize,
    pub workers: usize,
    pub seconds: f64,
    pub flows_per_sec: f64,
    pub latency_us_mean: f64,
    pub latency_us_p50: f64,
    pub latency_us_p90: f64,
    pub latency_us_p99: f64,
    pub latency_us_max: f64,
    /// SHA-256 over the decision sequence; equal across runs on one model.
    pub decisions_sha256: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    /// "input" for bad requests/data, "internal" otherwise.
    pub kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectKRequest {
    /// Labeled training file.
    pub train: PathBuf,
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
    /// Odd values of k to compare.
    pub candidates: Vec<usize>,
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectKResponse {
    /// (k, mean held-out accuracy on the layer-1 DoS task), in request order.
    pub accuracy: Vec<(usize, f64)>,
    /// Most accurate k; the smallest wins ties.
    pub best: usize,
}
