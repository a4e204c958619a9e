//! Confusion counts and the accuracy / false-alarm / precision / recall / F1
//! suite. Attack is the positive class throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Adds one scored instance.
    pub fn record(&mut self, predicted_attack: bool, actual_attack: bool) {
        match (predicted_attack, actual_attack) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn metrics(&self) -> MetricSet {
        compute_metrics(self)
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Fractions in [0, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub far: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricSet {
    /// `[accuracy, far, precision, recall, f1]` as percentages.
    pub fn percentages(&self) -> [f64; 5] {
        [self.accuracy, self.far, self.precision, self.recall, self.f1].map(|v| v * 100.0)
    }
}

/// Positional comparison of ±1 label vectors (+1 = attack).
pub fn confusion(predicted: &[f64], truth: &[f64]) -> Result<ConfusionCounts> {
    if predicted.len() != truth.len() {
        return Err(Error::dim("confusion labels", truth.len(), predicted.len()));
    }
    if predicted.is_empty() {
        return Err(Error::Input("cannot score an empty label set".into()));
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in predicted.iter().zip(truth) {
        c.record(*p > 0.0, *t > 0.0);
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Zero denominators yield 0 for every metric.
pub fn compute_metrics(c: &ConfusionCounts) -> MetricSet {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    MetricSet {
        accuracy: ratio(c.tp + c.tn, c.total()),
        far: ratio(c.fp, c.fp + c.tn),
        precision,
        recall,
        f1,
    }
}

pub fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}
