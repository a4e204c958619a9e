//! Run configuration: flat `key = value` text, defaults matching the
//! reference per-layer parameters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helm::HelmWidths;
use crate::linalg::FistaSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub model: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub knn_k: usize,
    pub elm_n: usize,
    pub elm_c: f64,
    pub helm3: HelmWidths,
    pub helm4: HelmWidths,
    pub helm5: HelmWidths,
    pub helm_c: f64,
    pub fista: FistaSettings,
    pub bench_workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: None,
            test: None,
            taxonomy: None,
            model: PathBuf::from("flowcascade.model"),
            out: PathBuf::from("prepared"),
            seed: 1,
            knn_k: 65,
            elm_n: 400,
            elm_c: 1e2,
            helm3: HelmWidths::new(40, 40, 200),
            helm4: HelmWidths::new(10, 10, 300),
            helm5: HelmWidths::new(10, 10, 200),
            helm_c: 1e2,
            fista: FistaSettings::default(),
            bench_workers: 1,
        }
    }
}

pub const KEYS: &[&str] = &[
    "train",
    "test",
    "taxonomy",
    "model",
    "out",
    "seed",
    "knn.k",
    "elm.n",
    "elm.c",
    "helm3",
    "helm4",
    "helm5",
    "helm.c",
    "fista.iterations",
    "fista.lambda",
    "fista.power_tolerance",
    "fista.power_iterations",
    "bench.workers",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "train" => self.train = path(),
            "test" => self.test = path(),
            "taxonomy" => self.taxonomy = path(),
            "model" => self.model = PathBuf::from(value),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "knn.k" => self.knn_k = num(key, value)?,
            "elm.n" => self.elm_n = num(key, value)?,
            "elm.c" => self.elm_c = num(key, value)?,
            "helm3" => self.helm3 = value.parse()?,
            "helm4" => self.helm4 = value.parse()?,
            "helm5" => self.helm5 = value.parse()?,
            "helm.c" => self.helm_c = num(key, value)?,
            "fista.iterations" => self.fista.max_iterations = num(key, value)?,
            "fista.lambda" => self.fista.l1_weight = num(key, value)?,
            "fista.power_tolerance" => self.fista.power_tolerance = num(key, value)?,
            "fista.power_iterations" => self.fista.power_max_iterations = num(key, value)?,
            "bench.workers" => self.bench_workers = num(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "train" => opt_path(&self.train),
            "test" => opt_path(&self.test),
            "taxonomy" => opt_path(&self.taxonomy),
            "model" => self.model.display().to_string(),
            "out" => self.out.display().to_string(),
            "seed" => self.seed.to_string(),
            "knn.k" => self.knn_k.to_string(),
            "elm.n" => self.elm_n.to_string(),
            "elm.c" => self.elm_c.to_string(),
            "helm3" => self.helm3.to_string(),
            "helm4" => self.helm4.to_string(),
            "helm5" => self.helm5.to_string(),
            "helm.c" => self.helm_c.to_string(),
            "fista.iterations" => self.fista.max_iterations.to_string(),
            "fista.lambda" => self.fista.l1_weight.to_string(),
            "fista.power_tolerance" => self.fista.power_tolerance.to_string(),
            "fista.power_iterations" => self.fista.power_max_iterations.to_string(),
            "bench.workers" => self.bench_workers.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(k.trim(), v).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Every key in canonical order; `from_text(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    /// Checks hyperparameters before any expensive work starts.
    pub fn validate(&self) -> Result<()> {
        if self.knn_k == 0 || self.knn_k % 2 == 0 {
            return Err(Error::Config(format!("knn.k must be a positive odd integer, got {}", self.knn_k)));
        }
        if self.elm_n == 0 {
            return Err(Error::Config("elm.n must be positive".into()));
        }
        for (name, c) in [("elm.c", self.elm_c), ("helm.c", self.helm_c)] {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {c}")));
            }
        }
        self.helm3.validate()?;
        self.helm4.validate()?;
        self.helm5.validate()?;
        self.fista.validate()?;
        if self.bench_workers == 0 {
            return Err(Error::Config("bench.workers must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_parameters() {
        let c = RunConfig::default();
        assert_eq!(c.knn_k, 65);
        assert_eq!(c.elm_n, 400);
        assert_eq!(c.helm3, HelmWidths::new(40, 40, 200));
        assert_eq!(c.helm4, HelmWidths::new(10, 10, 300));
        assert_eq!(c.helm5, HelmWidths::new(10, 10, 200));
        assert_eq!(c.fista.max_iterations, 50);
        assert_eq!(c.fista.l1_weight, 1e-3);
        c.validate().unwrap();
    }

    #[test]
    fn text_roundtrip() {
        let mut c = RunConfig::default();
        c.train = Some("data/KDDTrain+.txt".into());
        c.seed = 99;
        c.elm_c = 0.125;
        c.helm4 = HelmWidths::new(12, 8, 250);
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn overrides_and_errors() {
        let c = RunConfig::from_text("# comment\nknn.k = 7\nhelm3 = 5,6,7 # inline\n").unwrap();
        assert_eq!(c.knn_k, 7);
        assert_eq!(c.helm3, HelmWidths::new(5, 6, 7));
        assert!(RunConfig::from_text("bogus = 1").is_err());
        assert!(RunConfig::from_text("knn.k").is_err());
        assert!(RunConfig::from_text("knn.k = x").is_err());
        assert!(RunConfig::from_text("knn.k = 4").unwrap().validate().is_err());
    }
}
