//! Prepared-dataset cache.
//!
//! A cache directory holds `train.csv` and `test.csv` (one row per record:
//! the eight scaled components, the category and the raw attack name, under
//! a header row), the fitted scaler in `scaler.txt` and the category census
//! of both splits in `census.json`. Floats are written in shortest
//! round-trip form so a reload is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Category, Census, FeatureVector, FlowRecord, Scaler, Taxonomy, FEATURE_DIM, FEATURE_NAMES};

/// Scaled vectors of one split plus their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSplit {
    pub features: Vec<FeatureVector>,
    pub categories: Vec<Category>,
    pub attacks: Vec<String>,
}

impl PreparedSplit {
    pub fn from_records(records: &[FlowRecord], taxonomy: &Taxonomy, scaler: &Scaler) -> Result<Self> {
        let categories = taxonomy.label_records(records)?;
        let attacks = records
            .iter()
            .map(|r| r.label().map(str::to_string))
            .collect::<Result<_>>()?;
        Ok(PreparedSplit {
            features: records.iter().map(|r| scaler.transform(r)).collect(),
            categories,
            attacks,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn header() -> String {
        let mut h = FEATURE_NAMES.join(",");
        h.push_str(",category,attack");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header();
        out.push('\n');
        for ((v, c), a) in self.features.iter().zip(&self.categories).zip(&self.attacks) {
            for x in v.0 {
                let _ = write!(out, "{x},");
            }
            let _ = writeln!(out, "{c},{a}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == Self::header() => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header {:?}", Self::header()),
                })
            }
        }
        let mut split = PreparedSplit {
            features: Vec::new(),
            categories: Vec::new(),
            attacks: Vec::new(),
        };
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != FEATURE_DIM + 2 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", FEATURE_DIM + 2, cols.len()),
                });
            }
            let mut v = [0.0; FEATURE_DIM];
            for (j, slot) in v.iter_mut().enumerate() {
                *slot = cols[j].parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad number {:?}", cols[j]),
                })?;
            }
            split.features.push(FeatureVector(v));
            split.categories.push(cols[FEATURE_DIM].parse().map_err(|e: Error| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?);
            split.attacks.push(cols[FEATURE_DIM + 1].to_string());
        }
        Ok(split)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusPair {
    pub train: Census,
    pub test: Census,
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub scaler: Scaler,
    pub train: PreparedSplit,
    pub test: PreparedSplit,
    pub census: CensusPair,
}

impl PreparedData {
    /// Fits the scaler on the training records only and encodes both splits.
    pub fn prepare(train: &[FlowRecord], test: &[FlowRecord], taxonomy: &Taxonomy) -> Result<Self> {
        let scaler = Scaler::fit(train)?;
        Ok(PreparedData {
            train: PreparedSplit::from_records(train, taxonomy, &scaler)?,
            test: PreparedSplit::from_records(test, taxonomy, &scaler)?,
            census: CensusPair {
                train: Census::compute(taxonomy, train)?,
                test: Census::compute(taxonomy, test)?,
            },
            scaler,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(p, e))
        };
        put("train.csv", self.train.to_csv())?;
        put("test.csv", self.test.to_csv())?;
        put("scaler.txt", scaler_to_text(&self.scaler))?;
        put(
            "census.json",
            serde_json::to_string_pretty(&self.census).expect("census serializes") + "\n",
        )?;
        Ok(())
    }
}

pub fn scaler_to_text(s: &Scaler) -> String {
    let mut out = String::from("component,min,max\n");
    for j in 0..FEATURE_DIM {
        let _ = writeln!(out, "{},{},{}", FEATURE_NAMES[j], s.min[j], s.max[j]);
    }
    out
}

pub fn scaler_from_text(text: &str) -> Result<Scaler> {
    let mut s = Scaler {
        min: [0.0; FEATURE_DIM],
        max: [0.0; FEATURE_DIM],
    };
    let rows: Vec<&str> = text.lines().skip(1).filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != FEATURE_DIM {
        return Err(Error::Input(format!("scaler file needs {FEATURE_DIM} rows")));
    }
    for (j, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        let num = |k: usize| -> Result<f64> {
            cols.get(k)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: j + 2,
                    message: format!("bad scaler row {row:?}"),
                })
        };
        if cols.first() != Some(&FEATURE_NAMES[j]) {
            return Err(Error::Parse {
                line: j + 2,
                message: format!("expected component {}", FEATURE_NAMES[j]),
            });
        }
        s.min[j] = num(1)?;
        s.max[j] = num(2)?;
    }
    Ok(s)
}
