use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{to_matrix, Category, FlowRecord, LayerTarget, PreparedSplit, LAYER_COUNT};
use crate::error::{Error, Result};
use crate::helm::HelmModel;
use crate::knn::KnnModel;
use crate::metrics::{pct, ConfusionCounts, MetricSet};
use crate::rng::derive_seed;

use super::{layer_target, route_scores, CascadeModel, LayerModel, Prediction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryScore {
    pub counts: ConfusionCounts,
    pub metrics: MetricSet,
}

impl From<ConfusionCounts> for BinaryScore {
    fn from(counts: ConfusionCounts) -> Self {
        BinaryScore {
            counts,
            metrics: counts.metrics(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    pub classifier: String,
    pub detected: String,
    /// One-vs-all over the whole test set.
    pub full_set: BinaryScore,
    /// One-vs-all over the flows every earlier layer passed on.
    pub surviving: BinaryScore,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoveltyRecall {
    pub known_attacks: u64,
    pub known_detected: u64,
    pub new_attacks: u64,
    pub new_detected: u64,
}

impl NoveltyRecall {
    pub fn known_recall(&self) -> f64 {
        ratio(self.known_detected, self.known_attacks)
    }

    pub fn new_recall(&self) -> f64 {
        ratio(self.new_detected, self.new_attacks)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RunConfig,
    pub records: usize,
    pub layers: Vec<LayerReport>,
    /// Attack versus normal: any non-Normal decision counts as attack.
    pub overall: BinaryScore,
    pub novelty: NoveltyRecall,
    /// Ground-truth category → predicted label → count.
    pub decisions: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Scores one binary layer against a one-vs-all target.
pub fn evaluate_binary(
    layer: &LayerModel,
    x: &DMatrix<f64>,
    categories: &[Category],
    target: LayerTarget,
) -> Result<BinaryScore> {
    if x.nrows() != categories.len() {
        return Err(Error::dim("evaluation labels", x.nrows(), categories.len()));
    }
    if categories.is_empty() {
        return Err(Error::Input("empty evaluation set".into()));
    }
    let mut c = ConfusionCounts::default();
    for (s, cat) in layer.scores(x)?.into_iter().zip(categories) {
        c.record(LayerModel::vote(s), target.is_positive(*cat));
    }
    Ok(c.into())
}

/// Evaluates already-scaled vectors. `attacks` carries the raw label per row
/// (used for the known/new split).
pub fn evaluate_prepared(
    model: &CascadeModel,
    x: &DMatrix<f64>,
    categories: &[Category],
    attacks: &[String],
) -> Result<EvalReport> {
    if categories.is_empty() {
        return Err(Error::Input("empty test set".into()));
    }
    if x.nrows() != categories.len() || attacks.len() != categories.len() {
        return Err(Error::dim("evaluation labels", x.nrows(), categories.len()));
    }
    let scores = model.all_scores(x)?;

    let mut full = [ConfusionCounts::default(); LAYER_COUNT];
    let mut surviving = [ConfusionCounts::default(); LAYER_COUNT];
    let mut overall = ConfusionCounts::default();
    let mut novelty = NoveltyRecall::default();
    let mut decisions: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();

    for ((row, cat), attack) in scores.iter().zip(categories).zip(attacks) {
        let decision = route_scores(row);
        let reached = decision.deciding_layer.unwrap_or(LAYER_COUNT);
        for layer in 1..=LAYER_COUNT {
            let vote = LayerModel::vote(row[layer - 1]);
            let truth = layer_target(layer).is_positive(*cat);
            full[layer - 1].record(vote, truth);
            if layer <= reached {
                surviving[layer - 1].record(vote, truth);
            }
        }
        let flagged = decision.predicted.is_attack();
        overall.record(flagged, cat.is_attack());
        if cat.is_attack() {
            if model.taxonomy.is_new(attack) {
                novelty.new_attacks += 1;
                novelty.new_detected += flagged as u64;
            } else {
                novelty.known_attacks += 1;
                novelty.known_detected += flagged as u64;
            }
        }
        *decisions
            .entry(cat.to_string())
            .or_default()
            .entry(decision.predicted.to_string())
            .or_default() += 1;
    }

    let layers = (1..=LAYER_COUNT)
        .map(|layer| LayerReport {
            layer,
            classifier: model.layer(layer).kind().to_string(),
            detected: layer_target(layer).name().to_string(),
            full_set: full[layer - 1].into(),
            surviving: surviving[layer - 1].into(),
        })
        .collect();

    Ok(EvalReport {
        config: model.config.clone(),
        records: categories.len(),
        layers,
        overall: overall.into(),
        novelty,
        decisions,
    })
}

pub fn evaluate_cascade(model: &CascadeModel, records: &[FlowRecord]) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Input("empty test set".into()));
    }
    let split = PreparedSplit::from_records(records, &model.taxonomy, &model.scaler)?;
    evaluate_prepared(model, &to_matrix(&split.features), &split.categories, &split.attacks)
}

impl EvalReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Test records: {}", self.records);
        let _ = writeln!(out);
        let _ = writeln!(out, "Per-layer one-vs-all results (population = full test set)");
        let _ = writeln!(
            out,
            "{:<6}{:<11}{:<10}{:>13}{:>9}{:>14}{:>11}{:>9}",
            "Layer", "Classifier", "Detected", "Accuracy(%)", "FAR(%)", "Precision(%)", "Recall(%)", "F1(%)"
        );
        for l in &self.layers {
            let m = &l.full_set.metrics;
            let _ = writeln!(
                out,
                "{:<6}{:<11}{:<10}{:>13}{:>9}{:>14}{:>11}{:>9}",
                l.layer,
                l.classifier,
                l.detected,
                pct(m.accuracy),
                pct(m.far),
                pct(m.precision),
                pct(m.recall),
                pct(m.f1)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Per-layer one-vs-all results (population = flows reaching the layer)");
        let _ = writeln!(
            out,
            "{:<6}{:<11}{:<10}{:>10}{:>13}{:>9}",
            "Layer", "Classifier", "Detected", "Flows", "Accuracy(%)", "FAR(%)"
        );
        for l in &self.layers {
            let m = &l.surviving.metrics;
            let _ = writeln!(
                out,
                "{:<6}{:<11}{:<10}{:>10}{:>13}{:>9}",
                l.layer,
                l.classifier,
                l.detected,
                l.surviving.counts.total(),
                pct(m.accuracy),
                pct(m.far)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Overall attack/normal results");
        let _ = writeln!(
            out,
            "{:<14}{:>13}{:>9}{:>14}{:>11}{:>9}",
            "Method", "Accuracy(%)", "FAR(%)", "Precision(%)", "Recall(%)", "F1(%)"
        );
        let m = &self.overall.metrics;
        let _ = writeln!(
            out,
            "{:<14}{:>13}{:>9}{:>14}{:>11}{:>9}",
            "Cascade",
            pct(m.accuracy),
            pct(m.far),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1)
        );
        let c = &self.overall.counts;
        let _ = writeln!(out, "TP={} TN={} FP={} FN={}", c.tp, c.tn, c.fp, c.fn_);
        let n = &self.novelty;
        let _ = writeln!(
            out,
            "Recall on known attacks: {}% ({}/{}); on new attacks: {}% ({}/{})",
            pct(n.known_recall()),
            n.known_detected,
            n.known_attacks,
            pct(n.new_recall()),
            n.new_detected,
            n.new_attacks
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "Decisions (rows: true category, columns: predicted)");
        let _ = write!(out, "{:<8}", "");
        for p in Prediction::ALL {
            let _ = write!(out, "{:>9}", p.as_str());
        }
        let _ = writeln!(out);
        for cat in Category::ALL {
            let row = self.decisions.get(cat.as_str());
            let _ = write!(out, "{:<8}", cat.as_str());
            for p in Prediction::ALL {
                let v = row.and_then(|r| r.get(p.as_str())).copied().unwrap_or(0);
                let _ = write!(out, "{v:>9}");
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Configuration");
        for line in self.config.to_text().lines() {
            let _ = writeln!(out, "  {line}");
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from(
            "scope,layer,classifier,detected,population,tp,tn,fp,fn,accuracy,far,precision,recall,f1\n",
        );
        let mut row = |scope: &str, layer: String, classifier: &str, detected: &str, s: &BinaryScore| {
            let m = &s.metrics;
            let c = &s.counts;
            let _ = writeln!(
                out,
                "{scope},{layer},{classifier},{detected},{},{},{},{},{},{},{},{},{},{}",
                c.total(),
                c.tp,
                c.tn,
                c.fp,
                c.fn_,
                pct(m.accuracy),
                pct(m.far),
                pct(m.precision),
                pct(m.recall),
                pct(m.f1)
            );
        };
        for l in &self.layers {
            row("full_set", l.layer.to_string(), &l.classifier, &l.detected, &l.full_set);
        }
        for l in &self.layers {
            row("surviving", l.layer.to_string(), &l.classifier, &l.detected, &l.surviving);
        }
        row("overall", "all".into(), "cascade", "all", &self.overall);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub knn: BinaryScore,
    pub helm: BinaryScore,
}

/// Trains kNN and H-ELM alone on the attack/normal task (same k, the
/// final-layer widths, and that layer's seed) and scores them on the test
/// vectors.
pub fn standalone_baselines(
    train_x: &DMatrix<f64>,
    train_categories: &[Category],
    test_x: &DMatrix<f64>,
    test_categories: &[Category],
    config: &RunConfig,
) -> Result<BaselineReport> {
    config.validate()?;
    let y: Vec<f64> = train_categories
        .iter()
        .map(|c| LayerTarget::AnyAttack.target(*c))
        .collect();
    let knn = LayerModel::Knn(KnnModel::train(train_x, &y, config.knn_k)?);
    let helm = LayerModel::Helm(HelmModel::train(
        train_x,
        &y,
        config.helm5,
        config.helm_c,
        &config.fista,
        derive_seed(config.seed, 5),
    )?);
    Ok(BaselineReport {
        knn: evaluate_binary(&knn, test_x, test_categories, LayerTarget::AnyAttack)?,
        helm: evaluate_binary(&helm, test_x, test_categories, LayerTarget::AnyAttack)?,
    })
}
