use flowcascade::api::{
    BenchReport, BenchRequest, ClassifyRequest, ClassifyResponse, ErrorBody, EvalRequest, EvalResponse,
    LoadModelRequest, ModelInfo, TrainRequest, TrainResponse,
};
use flowcascade::config::RunConfig;
use flowcascade::helm::HelmWidths;
use flowcascade::synth::{synthetic_dataset, DEFAULT_MIX};
use reqwest::StatusCode;
use serde_json::json;

async fn start() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(flowcascade_server::serve(listener));
    format!("http://{addr}")
}

fn write_rows(path: &std::path::Path, n: usize, new_fraction: f64, seed: u64) -> Vec<String> {
    let lines: Vec<String> = synthetic_dataset(n, DEFAULT_MIX, new_fraction, seed)
        .iter()
        .map(|r| r.to_csv_line())
        .collect();
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
    lines
}

#[tokio::test(flavor = "multi_thread")]
async fn health_and_empty_registry() {
    let base = start().await;
    let http = reqwest::Client::new();
    let r = http.get(format!("{base}/health")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let models: Vec<ModelInfo> = http.get(format!("{base}/v1/models")).send().await.unwrap().json().await.unwrap();
    assert!(models.is_empty());
}

#[tokio::test(flavor = "multi_thread")]
async fn errors_map_to_status_codes() {
    let base = start().await;
    let http = reqwest::Client::new();

    let r = http
        .post(format!("{base}/v1/classify"))
        .json(&json!({"model_id": "nope", "lines": []}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);

    let r = http
        .post(format!("{base}/v1/models/load"))
        .json(&LoadModelRequest {
            path: "/definitely/not/here.model".into(),
        })
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let body: ErrorBody = r.json().await.unwrap();
    assert_eq!(body.kind, "input");
    assert!(body.error.contains("here.model"), "{}", body.error);

    // malformed JSON never reaches a handler
    let r = http
        .post(format!("{base}/v1/train"))
        .header("content-type", "application/json")
        .body("{")
        .send()
        .await
        .unwrap();
    assert!(r.status().is_client_error());
}

#[tokio::test(flavor = "multi_thread")]
async fn train_load_classify_eval_bench() {
    let base = start().await;
    let http = reqwest::Client::new();
    let dir = tempfile::tempdir().unwrap();
    let train_path = dir.path().join("train.txt");
    let test_path = dir.path().join("test.txt");
    write_rows(&train_path, 1500, 0.0, 1);
    let test_lines = write_rows(&test_path, 200, 0.3, 2);

    let config = RunConfig {
        train: Some(train_path.clone()),
        model: dir.path().join("m.model"),
        knn_k: 5,
        elm_n: 40,
        helm3: HelmWidths::new(8, 8, 40),
        helm4: HelmWidths::new(6, 6, 40),
        helm5: HelmWidths::new(6, 6, 40),
        ..RunConfig::default()
    };
    let trained: TrainResponse = http
        .post(format!("{base}/v1/train"))
        .json(&TrainRequest { config: config.clone() })
        .send()
        .await
        .unwrap()
        .error_for_status()
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(trained.train_records, 1500);
    assert_eq!(trained.model.layers.len(), 5);
    let id = trained.model.model_id.clone();

    // loading the written file yields the same id
    let loaded: ModelInfo = http
        .post(format!("{base}/v1/models/load"))
        .json(&LoadModelRequest { path: config.model.clone() })
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(loaded.model_id, id);

    let mut lines = test_lines[..20].to_vec();
    lines.push("garbage".into());
    let resp: ClassifyResponse = http
        .post(format!("{base}/v1/classify"))
        .json(&ClassifyRequest {
            model_id: id.clone(),
            lines,
            first_id: 100,
        })
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(resp.decisions.len(), 21);
    for (i, d) in resp.decisions.iter().enumerate() {
        assert_eq!(d.id, 100 + i as u64);
        assert_eq!(d.category.is_some(), i < 20);
        assert_eq!(d.error.is_some(), i == 20);
    }

    let eval: EvalResponse = http
        .post(format!("{base}/v1/eval"))
        .json(&EvalRequest {
            model_id: id.clone(),
            test: test_path,
            baselines_train: None,
        })
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(eval.report.records, 200);
    assert!(eval.text.contains("H-ELM"));

    let bench = |seed| {
        let http = http.clone();
        let base = base.clone();
        let id = id.clone();
        async move {
            http.post(format!("{base}/v1/bench"))
                .json(&BenchRequest {
                    model_id: id,
                    flows: 500,
                    workers: 2,
                    seed,
                })
                .send()
                .await
                .unwrap()
                .json::<BenchReport>()
                .await
                .unwrap()
        }
    };
    let a = bench(3).await;
    let b = bench(3).await;
    assert_eq!(a.flows, 500);
    assert!(a.flows_per_sec > 0.0);
    assert!(a.latency_us_p50 <= a.latency_us_p99 && a.latency_us_p99 <= a.latency_us_max);
    assert_eq!(a.decisions_sha256, b.decisions_sha256);

    let models: Vec<ModelInfo> = http.get(format!("{base}/v1/models")).send().await.unwrap().json().await.unwrap();
    assert_eq!(models.len(), 1);
}
