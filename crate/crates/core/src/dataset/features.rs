use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::record::{extract_features, FlowRecord};

/// Encoded width: five numeric features plus a 3-way protocol one-hot.
pub const FEATURE_DIM: usize = 8;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "duration",
    "protocol_tcp",
    "protocol_udp",
    "protocol_icmp",
    "src_bytes",
    "dst_bytes",
    "count",
    "srv_count",
];

/// Encoded, scaled classifier input. Every component lies in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Unscaled encoding: log1p on durations and byte counts, linear window
/// counts, one-hot protocol.
pub fn encode(record: &FlowRecord) -> [f64; FEATURE_DIM] {
    let f = extract_features(record);
    let mut v = [0.0; FEATURE_DIM];
    v[0] = f.duration.ln_1p();
    v[1 + f.protocol.index()] = 1.0;
    v[4] = f.src_bytes.ln_1p();
    v[5] = f.dst_bytes.ln_1p();
    v[6] = f.count;
    v[7] = f.srv_count;
    v
}

/// Per-component min/max of the encoded training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: [f64; FEATURE_DIM],
    pub max: [f64; FEATURE_DIM],
}

impl Scaler {
    pub fn fit(records: &[FlowRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Input("cannot fit a scaler on zero records".into()));
        }
        let mut min = [f64::INFINITY; FEATURE_DIM];
        let mut max = [f64::NEG_INFINITY; FEATURE_DIM];
        for r in records {
            for (j, v) in encode(r).into_iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Scaler { min, max })
    }

    /// Scales an encoded vector; constant components map to 0 and values
    /// outside the fitted range are clamped.
    pub fn scale(&self, encoded: &[f64; FEATURE_DIM]) -> FeatureVector {
        let mut out = [0.0; FEATURE_DIM];
        for j in 0..FEATURE_DIM {
            let range = self.max[j] - self.min[j];
            out[j] = if range > 0.0 {
                ((encoded[j] - self.min[j]) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        FeatureVector(out)
    }

    pub fn transform(&self, record: &FlowRecord) -> FeatureVector {
        self.scale(&encode(record))
    }

    /// Transforms a batch into an (n × 8) matrix, one row per record.
    pub fn transform_all(&self, records: &[FlowRecord]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(records.len(), FEATURE_DIM);
        for (i, r) in records.iter().enumerate() {
            let v = self.transform(r);
            for j in 0..FEATURE_DIM {
                m[(i, j)] = v.0[j];
            }
        }
        m
    }
}

pub fn fit_scaler(records: &[FlowRecord]) -> Result<Scaler> {
    Scaler::fit(records)
}

pub fn transform(scaler: &Scaler, record: &FlowRecord) -> FeatureVector {
    scaler.transform(record)
}

/// Stacks feature vectors into an (n × 8) matrix.
pub fn to_matrix(vectors: &[FeatureVector]) -> DMatrix<f64> {
    DMatrix::from_fn(vectors.len(), FEATURE_DIM, |i, j| vectors[i].0[j])
}
