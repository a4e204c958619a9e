use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Category, FlowRecord, Scaler, Taxonomy};

pub const LAYER_COUNT: usize = 5;

/// Positive class of a cascade layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerTarget {
    Category(Category),
    /// Attack versus normal (the final layer).
    AnyAttack,
}

impl LayerTarget {
    /// Layers are numbered 1..=5: DoS, Probe, U2R, R2L, then attack/normal.
    pub fn for_layer(layer: usize) -> Result<Self> {
        Ok(match layer {
            1 => LayerTarget::Category(Category::Dos),
            2 => LayerTarget::Category(Category::Probe),
            3 => LayerTarget::Category(Category::U2R),
            4 => LayerTarget::Category(Category::R2L),
            5 => LayerTarget::AnyAttack,
            n => return Err(Error::Config(format!("layer must be 1..=5, got {n}"))),
        })
    }

    pub fn is_positive(self, c: Category) -> bool {
        match self {
            LayerTarget::Category(t) => c == t,
            LayerTarget::AnyAttack => c.is_attack(),
        }
    }

    /// ±1 target for one ground-truth category.
    pub fn target(self, c: Category) -> f64 {
        if self.is_positive(c) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerTarget::Category(c) => c.as_str(),
            LayerTarget::AnyAttack => "Unknown",
        }
    }
}

/// One-vs-all training set for a single layer.
#[derive(Debug, Clone)]
pub struct LayerDataset {
    pub layer: usize,
    pub features: DMatrix<f64>,
    pub targets: Vec<f64>,
}

impl LayerDataset {
    pub fn positives(&self) -> usize {
        self.targets.iter().filter(|t| **t > 0.0).count()
    }
}

/// Builds a layer's set from already-scaled features over the full
/// training population.
pub fn layer_dataset_from_features(
    features: &DMatrix<f64>,
    categories: &[Category],
    layer: usize,
) -> Result<LayerDataset> {
    if features.nrows() != categories.len() {
        return Err(Error::dim("layer dataset rows", features.nrows(), categories.len()));
    }
    let target = LayerTarget::for_layer(layer)?;
    let targets: Vec<f64> = categories.iter().map(|c| target.target(*c)).collect();
    let pos = targets.iter().filter(|t| **t > 0.0).count();
    if pos == 0 || pos == targets.len() {
        return Err(Error::Input(format!(
            "layer {layer} ({}) needs both classes; found {pos} positive of {}",
            target.name(),
            targets.len()
        )));
    }
    Ok(LayerDataset {
        layer,
        features: features.clone(),
        targets,
    })
}

pub fn build_layer_dataset(
    records: &[FlowRecord],
    taxonomy: &Taxonomy,
    scaler: &Scaler,
    layer: usize,
) -> Result<LayerDataset> {
    let categories = taxonomy.label_records(records)?;
    layer_dataset_from_features(&scaler.transform_all(records), &categories, layer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> (DMatrix<f64>, Vec<Category>) {
        (
            DMatrix::zeros(3, 8),
            vec![Category::Dos, Category::Probe, Category::Normal],
        )
    }

    #[test]
    fn layer_one_targets_dos_only() {
        let (x, c) = three();
        let d = layer_dataset_from_features(&x, &c, 1).unwrap();
        assert_eq!(d.targets, vec![1.0, -1.0, -1.0]);
    }

    #[test]
    fn layer_five_targets_all_attacks() {
        let (x, c) = three();
        let d = layer_dataset_from_features(&x, &c, 5).unwrap();
        assert_eq!(d.targets, vec![1.0, 1.0, -1.0]);
    }

    #[test]
    fn missing_target_class_errors() {
        let (x, c) = three();
        assert!(layer_dataset_from_features(&x, &c, 3).is_err());
        assert!(layer_dataset_from_features(&x, &c, 0).is_err());
        assert!(layer_dataset_from_features(&x, &c, 6).is_err());
        let all_attack = vec![Category::Dos; 3];
        assert!(layer_dataset_from_features(&x, &all_attack, 5).is_err());
    }
}
