//! The five-layer detector: one binary classifier per layer, evaluated in
//! order, the first positive vote deciding the category.

mod eval;
mod persist;

pub use eval::{
    evaluate_binary, evaluate_cascade, evaluate_prepared, standalone_baselines, BaselineReport, BinaryScore,
    EvalReport, LayerReport, NoveltyRecall,
};
pub use persist::{load_model, save_model, FORMAT_VERSION, MAGIC};

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{
    layer_dataset_from_features, Category, FeatureVector, FlowRecord, LayerTarget, Scaler, Taxonomy, FEATURE_DIM,
    LAYER_COUNT,
};
use crate::elm::ElmModel;
use crate::error::{Error, Result};
use crate::helm::HelmModel;
use crate::knn::KnnModel;
use crate::rng::derive_seed;

/// Category assigned to a flow at test time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prediction {
    Normal,
    #[serde(rename = "DoS")]
    Dos,
    Probe,
    U2R,
    R2L,
    /// Caught only by the final attack/normal layer.
    Unknown,
}

impl Prediction {
    pub const ALL: [Prediction; 6] = [
        Prediction::Normal,
        Prediction::Dos,
        Prediction::Probe,
        Prediction::U2R,
        Prediction::R2L,
        Prediction::Unknown,
    ];

    pub fn is_attack(self) -> bool {
        self != Prediction::Normal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Prediction::Normal => "Normal",
            Prediction::Dos => "DoS",
            Prediction::Probe => "Probe",
            Prediction::U2R => "U2R",
            Prediction::R2L => "R2L",
            Prediction::Unknown => "Unknown",
        }
    }

    /// What a positive vote at `layer` (1-based) means.
    pub fn for_layer(layer: usize) -> Prediction {
        match layer {
            1 => Prediction::Dos,
            2 => Prediction::Probe,
            3 => Prediction::U2R,
            4 => Prediction::R2L,
            _ => Prediction::Unknown,
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub predicted: Prediction,
    /// 1-based layer that voted positive; `None` when every layer voted −1.
    pub deciding_layer: Option<usize>,
    /// Raw score of every layer that was consulted.
    pub scores: [Option<f64>; LAYER_COUNT],
}

/// A trained layer. `Constant` always returns the same score and exists for
/// hand-built what-if and test models.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerModel {
    Knn(KnnModel),
    Elm(ElmModel),
    Helm(HelmModel),
    Constant { dim: usize, score: f64 },
}

impl LayerModel {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerModel::Knn(_) => "kNN",
            LayerModel::Elm(_) => "ELM",
            LayerModel::Helm(_) => "H-ELM",
            LayerModel::Constant { .. } => "constant",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            LayerModel::Knn(m) => m.dim(),
            LayerModel::Elm(m) => m.n_features(),
            LayerModel::Helm(m) => m.input_dim(),
            LayerModel::Constant { dim, .. } => *dim,
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            LayerModel::Knn(m) => m.score(x),
            LayerModel::Elm(m) => m.score(x),
            LayerModel::Helm(m) => m.score(x),
            LayerModel::Constant { dim, score } => {
                if x.len() != *dim {
                    return Err(Error::dim("constant layer input", *dim, x.len()));
                }
                Ok(*score)
            }
        }
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::dim("layer input", self.input_dim(), x.ncols()));
        }
        match self {
            LayerModel::Knn(m) => (0..x.nrows())
                .into_par_iter()
                .map(|i| {
                    let row: Vec<f64> = x.row(i).iter().copied().collect();
                    m.score(&row)
                })
                .collect(),
            LayerModel::Elm(m) => m.scores(x),
            LayerModel::Helm(m) => m.scores(x),
            LayerModel::Constant { score, .. } => Ok(vec![*score; x.nrows()]),
        }
    }

    /// Positive vote; a zero score counts as positive.
    pub fn vote(score: f64) -> bool {
        score >= 0.0
    }
}

/// Routes one flow given a score oracle per layer; layers after the first
/// positive vote are not consulted.
pub fn route(mut score: impl FnMut(usize) -> Result<f64>) -> Result<Decision> {
    let mut scores = [None; LAYER_COUNT];
    for layer in 1..=LAYER_COUNT {
        let s = score(layer)?;
        scores[layer - 1] = Some(s);
        if LayerModel::vote(s) {
            return Ok(Decision {
                predicted: Prediction::for_layer(layer),
                deciding_layer: Some(layer),
                scores,
            });
        }
    }
    Ok(Decision {
        predicted: Prediction::Normal,
        deciding_layer: None,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub scaler: Scaler,
    pub taxonomy: Taxonomy,
    pub config: RunConfig,
    layers: [LayerModel; LAYER_COUNT],
}

impl CascadeModel {
    pub fn from_layers(
        scaler: Scaler,
        taxonomy: Taxonomy,
        config: RunConfig,
        layers: [LayerModel; LAYER_COUNT],
    ) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            if l.input_dim() != FEATURE_DIM {
                return Err(Error::Input(format!(
                    "layer {} expects {} features, the scaler produces {FEATURE_DIM}",
                    i + 1,
                    l.input_dim()
                )));
            }
        }
        Ok(CascadeModel {
            scaler,
            taxonomy,
            config,
            layers,
        })
    }

    pub fn layers(&self) -> &[LayerModel; LAYER_COUNT] {
        &self.layers
    }

    /// Layer by 1-based index.
    pub fn layer(&self, layer: usize) -> &LayerModel {
        &self.layers[layer - 1]
    }

    pub fn classify_vector(&self, x: &FeatureVector) -> Decision {
        route(|layer| self.layers[layer - 1].score(x.as_slice())).expect("layer dimensions validated at construction")
    }

    pub fn classify_flow(&self, record: &FlowRecord) -> Decision {
        self.classify_vector(&self.scaler.transform(record))
    }

    /// Every layer's score for every row (no short-circuit), rows × layers.
    pub fn all_scores(&self, x: &DMatrix<f64>) -> Result<Vec<[f64; LAYER_COUNT]>> {
        let per_layer: Vec<Vec<f64>> = self.layers.iter().map(|l| l.scores(x)).collect::<Result<_>>()?;
        Ok((0..x.nrows())
            .map(|i| std::array::from_fn(|l| per_layer[l][i]))
            .collect())
    }
}

/// Routing over precomputed scores; later-layer scores are dropped from the
/// decision once a layer fires.
pub fn route_scores(scores: &[f64; LAYER_COUNT]) -> Decision {
    route(|layer| Ok(scores[layer - 1])).expect("infallible oracle")
}

/// Fits the scaler on the training records, builds the five one-vs-all sets
/// and trains every layer (in parallel) with per-layer seeds derived from
/// the master seed.
pub fn train_cascade(records: &[FlowRecord], taxonomy: &Taxonomy, config: &RunConfig) -> Result<CascadeModel> {
    config.validate()?;
    let categories = taxonomy.label_records(records)?;
    for c in Category::ALL {
        if !categories.contains(&c) {
            return Err(Error::Input(format!("training data has no {c} records")));
        }
    }
    let scaler = Scaler::fit(records)?;
    let x = scaler.transform_all(records);
    let layers = train_layers(&x, &categories, config)?;
    CascadeModel::from_layers(scaler, taxonomy.clone(), config.clone(), layers)
}

pub(crate) fn train_layers(
    x: &DMatrix<f64>,
    categories: &[Category],
    config: &RunConfig,
) -> Result<[LayerModel; LAYER_COUNT]> {
    let targets = |layer: usize| -> Result<Vec<f64>> { Ok(layer_dataset_from_features(x, categories, layer)?.targets) };
    let seed = |layer: usize| derive_seed(config.seed, layer as u64);
    let train_one = |layer: usize| -> Result<LayerModel> {
        let y = targets(layer)?;
        Ok(match layer {
            1 => LayerModel::Knn(KnnModel::train(x, &y, config.knn_k)?),
            2 => LayerModel::Elm(ElmModel::train(x, &y, config.elm_n, config.elm_c, seed(2))?),
            3 | 4 | 5 => {
                let widths = [config.helm3, config.helm4, config.helm5][layer - 3];
                LayerModel::Helm(HelmModel::train(x, &y, widths, config.helm_c, &config.fista, seed(layer))?)
            }
            _ => unreachable!(),
        })
    };
    let trained: Vec<Result<LayerModel>> = (1..=LAYER_COUNT).into_par_iter().map(train_one).collect();
    let mut out = Vec::with_capacity(LAYER_COUNT);
    for t in trained {
        out.push(t?);
    }
    Ok(out.try_into().expect("five layers"))
}

/// Target category for a layer, re-exported for report labels.
pub fn layer_target(layer: usize) -> LayerTarget {
    LayerTarget::for_layer(layer).expect("layer in 1..=5")
}
