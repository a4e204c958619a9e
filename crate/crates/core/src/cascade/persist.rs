//! Versioned model container.
//!
//! ```text
//! FLOWCASCADE-MODEL 1
//! config.<key> = <value>          one line per configuration key
//! taxonomy = <name>,<category>[,new]   one line per attack name
//! layer.<n> = <kind> [key=value ...]
//! matrices = <count>
//! payload_bytes = <len>
//! payload_sha256 = <hex>
//! <empty line>
//! <payload>
//! ```
//!
//! The payload is a sequence of matrices, each a little-endian `u64` row
//! count, a `u64` column count, then `rows * cols` little-endian `f64`
//! values in row-major order. Order: scaler (2 × 8: min row, max row), then
//! per layer in order
//! - kNN: samples (n × d), targets (n × 1)
//! - ELM: weights, biases (h × 1), β
//! - H-ELM: per stage decoder β and scale (1 × 1), then the head as ELM
//! - constant: score (1 × 1).

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::dataset::{Scaler, Taxonomy, FEATURE_DIM, LAYER_COUNT};
use crate::elm::ElmModel;
use crate::error::{Error, Result};
use crate::helm::{AutoencoderStage, HelmModel};
use crate::knn::KnnModel;

use super::{CascadeModel, LayerModel};

pub const MAGIC: &str = "FLOWCASCADE-MODEL";
pub const FORMAT_VERSION: u32 = 1;

fn put_matrix(buf: &mut Vec<u8>, m: &DMatrix<f64>) {
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn elm_matrices(m: &ElmModel, out: &mut Vec<DMatrix<f64>>) {
    out.push(m.weights.clone());
    out.push(column(&m.biases));
    out.push(m.beta.clone());
}

fn layer_header(l: &LayerModel) -> String {
    match l {
        LayerModel::Knn(m) => format!("knn k={}", m.k()),
        LayerModel::Elm(m) => format!("elm c={} seed={}", m.c, m.seed),
        LayerModel::Helm(m) => format!(
            "helm stages={} c={} seed={} head_seed={}",
            m.stages.len(),
            m.head.c,
            m.seed,
            m.head.seed
        ),
        LayerModel::Constant { dim, .. } => format!("constant dim={dim}"),
    }
}

/// Serialises a model. Output depends only on the model, so saving the same
/// model twice gives identical bytes.
pub fn save_model<W: Write>(model: &CascadeModel, mut sink: W) -> Result<()> {
    let mut mats: Vec<DMatrix<f64>> = Vec::new();
    let mut scaler = DMatrix::zeros(2, FEATURE_DIM);
    for j in 0..FEATURE_DIM {
        scaler[(0, j)] = model.scaler.min[j];
        scaler[(1, j)] = model.scaler.max[j];
    }
    mats.push(scaler);
    for l in model.layers() {
        match l {
            LayerModel::Knn(m) => {
                mats.push(m.samples());
                mats.push(DMatrix::from_column_slice(m.len(), 1, m.targets()));
            }
            LayerModel::Elm(m) => elm_matrices(m, &mut mats),
            LayerModel::Helm(m) => {
                for s in &m.stages {
                    mats.push(s.beta.clone());
                    mats.push(scalar(s.scale));
                }
                elm_matrices(&m.head, &mut mats);
            }
            LayerModel::Constant { score, .. } => mats.push(scalar(*score)),
        }
    }
    let mut payload = Vec::new();
    for m in &mats {
        put_matrix(&mut payload, m);
    }

    let mut header = format!("{MAGIC} {FORMAT_VERSION}\n");
    for line in model.config.to_text().lines() {
        header.push_str("config.");
        header.push_str(line);
        header.push('\n');
    }
    for line in model.taxonomy.to_text().lines() {
        header.push_str("taxonomy = ");
        header.push_str(line);
        header.push('\n');
    }
    for (i, l) in model.layers().iter().enumerate() {
        header.push_str(&format!("layer.{} = {}\n", i + 1, layer_header(l)));
    }
    header.push_str(&format!("matrices = {}\n", mats.len()));
    header.push_str(&format!("payload_bytes = {}\n", payload.len()));
    header.push_str(&format!("payload_sha256 = {}\n\n", hex::encode(Sha256::digest(&payload))));

    sink.write_all(header.as_bytes())?;
    sink.write_all(&payload)?;
    sink.flush()?;
    Ok(())
}

struct Payload<'a> {
    bytes: &'a [u8],
    pos: usize,
    count: usize,
}

impl Payload<'_> {
    fn u64(&mut self) -> Result<u64> {
        let b = self
            .bytes
            .get(self.pos..self.pos + 8)
            .ok_or_else(|| Error::Format("payload ends inside a matrix".into()))?;
        self.pos += 8;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.checked_mul(8).is_some_and(|b| b <= self.bytes.len() - self.pos))
            .ok_or_else(|| Error::Format(format!("matrix {rows}×{cols} overruns the payload")))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_bits(self.u64()?));
        }
        self.count += 1;
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn scalar(&mut self) -> Result<f64> {
        let m = self.matrix()?;
        if m.shape() != (1, 1) {
            return Err(Error::Format(format!("expected a 1×1 matrix, got {:?}", m.shape())));
        }
        Ok(m[(0, 0)])
    }

    fn elm(&mut self, c: f64, seed: u64) -> Result<ElmModel> {
        let weights = self.matrix()?;
        let biases = self.matrix()?;
        let beta = self.matrix()?;
        if biases.ncols() != 1
            || beta.ncols() != 1
            || biases.nrows() != weights.nrows()
            || beta.nrows() != weights.nrows()
        {
            return Err(Error::Format("inconsistent ELM matrix shapes".into()));
        }
        Ok(ElmModel {
            weights,
            biases: DVector::from_column_slice(biases.as_slice()),
            beta,
            c,
            seed,
        })
    }
}

fn attrs(spec: &str) -> (String, Vec<(String, String)>) {
    let mut parts = spec.split_whitespace();
    let kind = parts.next().unwrap_or("").to_string();
    let kv = parts
        .filter_map(|p| p.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    (kind, kv)
}

fn attr<T: std::str::FromStr>(kv: &[(String, String)], key: &str) -> Result<T> {
    kv.iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("layer header is missing a valid {key}")))
}

pub fn load_model<R: Read>(mut source: R) -> Result<CascadeModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::Format("missing header terminator".into()))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let payload = &bytes[split + 2..];

    let mut lines = header.lines();
    let first = lines.next().unwrap_or("");
    let version = first
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::Format("not a flowcascade model file".into()))?;
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::Format(format!(
            "unsupported model format version {version} (this build reads {FORMAT_VERSION})"
        )));
    }

    let mut config_text = String::new();
    let mut taxonomy_text = String::new();
    let mut layer_specs: [Option<String>; LAYER_COUNT] = Default::default();
    let mut matrices = None;
    let mut payload_bytes = None;
    let mut checksum = None;
    for line in lines {
        let (key, value) = line
            .split_once(" = ")
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Format(format!("bad header line {line:?}")))?;
        if let Some(k) = key.strip_prefix("config.") {
            config_text.push_str(&format!("{k} = {value}\n"));
        } else if key == "taxonomy" {
            taxonomy_text.push_str(value);
            taxonomy_text.push('\n');
        } else if let Some(n) = key.strip_prefix("layer.") {
            let idx: usize = n.parse().map_err(|_| Error::Format(format!("bad layer key {key}")))?;
            if !(1..=LAYER_COUNT).contains(&idx) {
                return Err(Error::Format(format!("layer index {idx} out of range")));
            }
            layer_specs[idx - 1] = Some(value.to_string());
        } else if key == "matrices" {
            matrices = value.parse::<usize>().ok();
        } else if key == "payload_bytes" {
            payload_bytes = value.parse::<usize>().ok();
        } else if key == "payload_sha256" {
            checksum = Some(value.to_string());
        } else {
            return Err(Error::Format(format!("unknown header key {key}")));
        }
    }

    let expected = payload_bytes.ok_or_else(|| Error::Format("missing payload_bytes".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, header says {expected} (truncated or padded file)",
            payload.len()
        )));
    }
    let digest = hex::encode(Sha256::digest(payload));
    if checksum.as_deref() != Some(digest.as_str()) {
        return Err(Error::Format("payload checksum mismatch".into()));
    }

    let config = RunConfig::from_text(&config_text).map_err(|e| Error::Format(format!("config snapshot: {e}")))?;
    let taxonomy = Taxonomy::parse(&taxonomy_text).map_err(|e| Error::Format(format!("taxonomy: {e}")))?;

    let mut p = Payload {
        bytes: payload,
        pos: 0,
        count: 0,
    };
    let scaler_m = p.matrix()?;
    if scaler_m.shape() != (2, FEATURE_DIM) {
        return Err(Error::Format("scaler matrix must be 2×8".into()));
    }
    let scaler = Scaler {
        min: std::array::from_fn(|j| scaler_m[(0, j)]),
        max: std::array::from_fn(|j| scaler_m[(1, j)]),
    };

    let mut layers = Vec::with_capacity(LAYER_COUNT);
    for (i, spec) in layer_specs.iter().enumerate() {
        let spec = spec
            .as_deref()
            .ok_or_else(|| Error::Format(format!("missing layer.{}", i + 1)))?;
        let (kind, kv) = attrs(spec);
        let layer = match kind.as_str() {
            "knn" => {
                let samples = p.matrix()?;
                let targets = p.matrix()?;
                LayerModel::Knn(
                    KnnModel::from_parts(attr(&kv, "k")?, &samples, targets.as_slice().to_vec())
                        .map_err(|e| Error::Format(format!("kNN layer: {e}")))?,
                )
            }
            "elm" => LayerModel::Elm(p.elm(attr(&kv, "c")?, attr(&kv, "seed")?)?),
            "helm" => {
                let n: usize = attr(&kv, "stages")?;
                let mut stages = Vec::with_capacity(n);
                for _ in 0..n {
                    let beta = p.matrix()?;
                    let scale = p.scalar()?;
                    stages.push(AutoencoderStage { beta, scale });
                }
                let head = p.elm(attr(&kv, "c")?, attr(&kv, "head_seed")?)?;
                LayerModel::Helm(HelmModel {
                    stages,
                    head,
                    seed: attr(&kv, "seed")?,
                })
            }
            "constant" => LayerModel::Constant {
                dim: attr(&kv, "dim")?,
                score: p.scalar()?,
            },
            other => return Err(Error::Format(format!("unknown layer kind {other:?}"))),
        };
        layers.push(layer);
    }
    if p.pos != payload.len() {
        return Err(Error::Format("trailing bytes after the last matrix".into()));
    }
    if matrices != Some(p.count) {
        return Err(Error::Format(format!(
            "header lists {matrices:?} matrices, payload holds {}",
            p.count
        )));
    }
    let layers: [LayerModel; LAYER_COUNT] = layers.try_into().expect("five layers");
    CascadeModel::from_layers(scaler, taxonomy, config, layers).map_err(|e| Error::Format(e.to_string()))
}

impl CascadeModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        save_model(self, &mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        load_model(bytes)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
