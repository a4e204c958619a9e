//! NSL-KDD ingestion: record parsing, attack taxonomy, the six-feature
//! encoding with its min-max scaler, and per-layer one-vs-all training sets.

mod cache;
mod features;
mod layers;
mod record;
mod taxonomy;

pub use cache::{scaler_from_text, scaler_to_text, CensusPair, PreparedData, PreparedSplit};
pub use features::{encode, fit_scaler, to_matrix, transform, FeatureVector, Scaler, FEATURE_DIM, FEATURE_NAMES};
pub use layers::{build_layer_dataset, layer_dataset_from_features, LayerDataset, LayerTarget, LAYER_COUNT};
pub use record::{
    detect_difficulty_column, extract_features, parse_line, parse_nslkdd, FlowFeatures, FlowRecord, Protocol,
    RowLayout, ATTRIBUTE_COUNT,
};
pub use taxonomy::{map_attack_category, Category, Census, Taxonomy, TaxonomyEntry};

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Reads a labeled NSL-KDD file, detecting the difficulty column from the
/// first non-empty line.
pub fn read_nslkdd_file(path: &Path) -> Result<Vec<FlowRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    let mut skipped = 0usize;
    loop {
        first.clear();
        if reader.read_line(&mut first).map_err(|e| Error::io(path, e))? == 0 {
            return Ok(Vec::new());
        }
        skipped += 1;
        if !first.trim().is_empty() {
            break;
        }
    }
    let first_line = first.trim_end_matches(['\r', '\n']);
    let has_difficulty = detect_difficulty_column(first_line).ok_or_else(|| Error::Parse {
        line: skipped,
        message: format!(
            "expected 42 or 43 fields, found {}",
            first_line.split(',').count()
        ),
    })?;
    let layout = RowLayout::labeled(has_difficulty);
    let mut records = vec![parse_line(first_line, layout, skipped)?];
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_line(&line, layout, skipped + i + 1)?);
    }
    Ok(records)
}
