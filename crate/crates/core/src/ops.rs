//! The command-level operations (prepare, train, evaluate, classify, bench)
//! on top of the library, shared by the service and tests.

use std::path::Path;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::api::{
    BenchReport, DecisionRecord, EvalResponse, ModelInfo, PrepareResponse, SelectKRequest, SelectKResponse, TrainResponse,
};
use crate::cascade::{evaluate_prepared, standalone_baselines, train_cascade, CascadeModel};
use crate::config::RunConfig;
use crate::dataset::{
    parse_line, read_nslkdd_file, scaler_from_text, to_matrix, PreparedData, PreparedSplit, RowLayout, Taxonomy,
};
use crate::error::{Error, Result};
use crate::synth::synthetic_flows;

pub fn resolve_taxonomy(path: Option<&Path>) -> Result<Taxonomy> {
    match path {
        Some(p) => Taxonomy::load(p),
        None => Ok(Taxonomy::builtin()),
    }
}

pub fn prepare(train: &Path, test: &Path, taxonomy: Option<&Path>, out: &Path) -> Result<PrepareResponse> {
    let taxonomy = resolve_taxonomy(taxonomy)?;
    let train_records = read_nslkdd_file(train)?;
    let test_records = read_nslkdd_file(test)?;
    let prepared = PreparedData::prepare(&train_records, &test_records, &taxonomy)?;
    prepared.write(out)?;
    Ok(PrepareResponse {
        out: out.to_path_buf(),
        train_records: train_records.len(),
        test_records: test_records.len(),
        census_text: format!(
            "Training split\n{}\nTest split\n{}",
            prepared.census.train.render(),
            prepared.census.test.render()
        ),
        census: prepared.census,
    })
}

pub fn model_info(model: &CascadeModel, bytes: &[u8], path: Option<&Path>) -> ModelInfo {
    let sha = hex::encode(Sha256::digest(bytes));
    ModelInfo {
        model_id: sha[..16].to_string(),
        path: path.map(Path::to_path_buf),
        sha256: sha,
        bytes: bytes.len() as u64,
        layers: model.layers().iter().map(|l| l.kind().to_string()).collect(),
        config: model.config.clone(),
    }
}

/// Trains on `config.train` and writes the model to `config.model`.
pub fn train(config: &RunConfig) -> Result<(CascadeModel, TrainResponse)> {
    config.validate()?;
    let train_path = config
        .train
        .as_deref()
        .ok_or_else(|| Error::Config("no training file given (train)".into()))?;
    let taxonomy = resolve_taxonomy(config.taxonomy.as_deref())?;
    let records = read_nslkdd_file(train_path)?;
    let started = Instant::now();
    let model = train_cascade(&records, &taxonomy, config)?;
    let seconds = started.elapsed().as_secs_f64();
    let bytes = model.to_bytes();
    std::fs::write(&config.model, &bytes).map_err(|e| Error::io(&config.model, e))?;
    let info = model_info(&model, &bytes, Some(&config.model));
    Ok((
        model,
        TrainResponse {
            model: info,
            train_records: records.len(),
            seconds,
        },
    ))
}

/// Loads a test split: a prepared cache directory (whose scaler must match
/// the model's) or a labeled NSL-KDD file.
pub fn load_test_split(model: &CascadeModel, test: &Path) -> Result<PreparedSplit> {
    if test.is_dir() {
        let scaler_path = test.join("scaler.txt");
        let text = std::fs::read_to_string(&scaler_path).map_err(|e| Error::io(&scaler_path, e))?;
        if scaler_from_text(&text)? != model.scaler {
            return Err(Error::Input(format!(
                "{} was prepared with a different scaler than this model; rerun prepare on the model's training file",
                test.display()
            )));
        }
        PreparedSplit::read(&test.join("test.csv"))
    } else {
        let records = read_nslkdd_file(test)?;
        PreparedSplit::from_records(&records, &model.taxonomy, &model.scaler)
    }
}

pub fn evaluate(model: &CascadeModel, test: &Path, baselines_train: Option<&Path>) -> Result<EvalResponse> {
    let split = load_test_split(model, test)?;
    if split.is_empty() {
        return Err(Error::Input("test set is empty".into()));
    }
    let x = to_matrix(&split.features);
    let report = evaluate_prepared(model, &x, &split.categories, &split.attacks)?;
    let baselines = match baselines_train {
        Some(path) => {
            let records = read_nslkdd_file(path)?;
            let train = PreparedSplit::from_records(&records, &model.taxonomy, &model.scaler)?;
            Some(standalone_baselines(
                &to_matrix(&train.features),
                &train.categories,
                &x,
                &split.categories,
                &model.config,
            )?)
        }
        None => None,
    };
    let mut text = report.render_text();
    if let Some(b) = &baselines {
        text.push_str(&render_baselines(b, &report));
    }
    Ok(EvalResponse {
        csv: report.render_csv(),
        text,
        report,
        baselines,
    })
}

fn render_baselines(b: &crate::cascade::BaselineReport, report: &crate::cascade::EvalReport) -> String {
    use crate::metrics::pct;
    let mut out = String::from("\nComparison on the same split (attack/normal)\n");
    out.push_str(&format!(
        "{:<14}{:>13}{:>9}{:>14}{:>11}{:>9}\n",
        "Method", "Accuracy(%)", "FAR(%)", "Precision(%)", "Recall(%)", "F1(%)"
    ));
    let k = report.config.knn_k;
    let w = report.config.helm5;
    let rows = [
        (format!("kNN k={k}"), &b.knn.metrics),
        (format!("H-ELM {w}"), &b.helm.metrics),
        ("Cascade".to_string(), &report.overall.metrics),
    ];
    for (name, m) in rows {
        out.push_str(&format!(
            "{:<14}{:>13}{:>9}{:>14}{:>11}{:>9}\n",
            name,
            pct(m.accuracy),
            pct(m.far),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1)
        ));
    }
    out
}

/// Classifies one raw stream line. Rows may carry 41 attributes, or 42/43
/// with label (and difficulty), which are ignored.
pub fn classify_line(model: &CascadeModel, line: &str, id: u64) -> DecisionRecord {
    let fields = line.split(',').count();
    let parsed = match RowLayout::from_field_count(fields) {
        Some(layout) => parse_line(line, layout, id as usize),
        None => Err(Error::Parse {
            line: id as usize,
            message: format!("expected 41 fields (42/43 with label), found {fields}"),
        }),
    };
    match parsed {
        Ok(record) => {
            let d = model.classify_flow(&record);
            DecisionRecord {
                id,
                category: Some(d.predicted),
                layer: d.deciding_layer,
                scores: Some(d.scores),
                error: None,
            }
        }
        Err(e) => DecisionRecord {
            id,
            category: None,
            layer: None,
            scores: None,
            error: Some(e.to_string()),
        },
    }
}

/// Classifies a batch of lines, in order; `lines[i]` gets id `first_id + i`.
/// Every line yields exactly one record, malformed ones an error record.
pub fn classify_lines(model: &CascadeModel, lines: &[String], first_id: u64) -> Vec<DecisionRecord> {
    use rayon::prelude::*;
    lines
        .par_iter()
        .enumerate()
        .map(|(i, l)| classify_line(model, l.trim_end_matches(['\r', '\n']), first_id + i as u64))
        .collect()
}

/// Cross-validates the layer-1 k on a training file.
pub fn select_k(req: &SelectKRequest) -> Result<SelectKResponse> {
    let taxonomy = resolve_taxonomy(req.taxonomy.as_deref())?;
    let records = read_nslkdd_file(&req.train)?;
    let scaler = crate::dataset::fit_scaler(&records)?;
    let split = PreparedSplit::from_records(&records, &taxonomy, &scaler)?;
    let target = crate::dataset::LayerTarget::for_layer(1)?;
    let y: Vec<f64> = split.categories.iter().map(|c| target.target(*c)).collect();
    let accuracy = crate::knn::cross_validate_k(&to_matrix(&split.features), &y, &req.candidates, req.folds, req.seed)?;
    let best = accuracy
        .iter()
        .fold(None::<(usize, f64)>, |best, &(k, a)| match best {
            Some((bk, ba)) if ba > a || (ba == a && bk < k) => Some((bk, ba)),
            _ => Some((k, a)),
        })
        .map(|(k, _)| k)
        .expect("at least one candidate");
    Ok(SelectKResponse { accuracy, best })
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank.min(sorted.len() - 1)]
}

/// Classifies `flows` synthetic records end to end (scaling + routing) on
/// `workers` threads and reports throughput and per-flow latency.
pub fn bench(model: &CascadeModel, flows: usize, workers: usize, seed: u64) -> Result<BenchReport> {
    if flows == 0 {
        return Err(Error::Input("bench needs at least one flow".into()));
    }
    if workers == 0 {
        return Err(Error::Input("bench needs at least one worker".into()));
    }
    let records = synthetic_flows(flows, seed);
    let per_worker = flows.div_ceil(workers);
    let started = Instant::now();
    let results: Vec<Vec<(f64, String)>> = std::thread::scope(|s| {
        let handles: Vec<_> = records
            .chunks(per_worker)
            .map(|chunk| {
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|r| {
                            let t = Instant::now();
                            let d = model.classify_flow(r);
                            let us = t.elapsed().as_secs_f64() * 1e6;
                            (us, format!("{}:{:?}", d.predicted, d.deciding_layer))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench worker")).collect()
    });
    let seconds = started.elapsed().as_secs_f64();

    let mut hasher = Sha256::new();
    let mut latencies = Vec::with_capacity(flows);
    for (us, d) in results.into_iter().flatten() {
        latencies.push(us);
        hasher.update(d.as_bytes());
        hasher.update(b"\n");
    }
    let mean = latencies.iter().sum::<f64>() / latencies.len() as f64;
    latencies.sort_by(f64::total_cmp);
    Ok(BenchReport {
        flows,
        workers,
        seconds,
        flows_per_sec: flows as f64 / seconds.max(f64::MIN_POSITIVE),
        latency_us_mean: mean,
        latency_us_p50: percentile(&latencies, 50.0),
        latency_us_p90: percentile(&latencies, 90.0),
        latency_us_p99: percentile(&latencies, 99.0),
        latency_us_max: *latencies.last().expect("non-empty"),
        decisions_sha256: hex::encode(hasher.finalize()),
        config: model.config.clone(),
    })
}
