use flowcascade::cascade::{evaluate_prepared, route_scores, train_cascade, CascadeModel, LayerModel, Prediction};
use flowcascade::config::RunConfig;
use flowcascade::dataset::{Category, FeatureVector, Scaler, Taxonomy, FEATURE_DIM, LAYER_COUNT};
use flowcascade::helm::HelmWidths;
use flowcascade::knn::knn_train;
use flowcascade::synth::{synthetic_dataset, DEFAULT_MIX};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn unit_scaler() -> Scaler {
    Scaler {
        min: [0.0; FEATURE_DIM],
        max: [1.0; FEATURE_DIM],
    }
}

fn constant_model(pattern: u32) -> CascadeModel {
    let layers = std::array::from_fn(|l| LayerModel::Constant {
        dim: FEATURE_DIM,
        score: if pattern >> l & 1 == 1 { 0.5 } else { -0.5 },
    });
    CascadeModel::from_layers(unit_scaler(), Taxonomy::builtin(), RunConfig::default(), layers).unwrap()
}

fn first_positive(pattern: u32) -> Option<usize> {
    (0..LAYER_COUNT).find(|l| pattern >> l & 1 == 1).map(|l| l + 1)
}

#[test]
fn every_sign_pattern_routes_to_the_first_positive_layer() {
    let expected = [
        Prediction::Dos,
        Prediction::Probe,
        Prediction::U2R,
        Prediction::R2L,
        Prediction::Unknown,
    ];
    for pattern in 0..32u32 {
        let d = constant_model(pattern).classify_vector(&FeatureVector([0.3; FEATURE_DIM]));
        let first = first_positive(pattern);
        assert_eq!(d.deciding_layer, first, "pattern {pattern:05b}");
        assert_eq!(d.predicted, first.map_or(Prediction::Normal, |l| expected[l - 1]));
        // consulted exactly up to the deciding layer
        let reached = first.unwrap_or(LAYER_COUNT);
        for l in 0..LAYER_COUNT {
            assert_eq!(d.scores[l].is_some(), l < reached, "pattern {pattern:05b} layer {}", l + 1);
        }
        // exactly one outcome among the six
        let hits = Prediction::ALL.iter().filter(|p| **p == d.predicted).count();
        assert_eq!(hits, 1);
    }
}

#[test]
fn zero_score_is_a_positive_vote() {
    let d = route_scores(&[-1.0, 0.0, 1.0, 1.0, 1.0]);
    assert_eq!(d.predicted, Prediction::Probe);
    assert_eq!(d.scores, [Some(-1.0), Some(0.0), None, None, None]);
    assert_eq!(route_scores(&[-1e-300; LAYER_COUNT]).predicted, Prediction::Normal);
}

proptest! {
    #[test]
    fn decision_counts_are_conserved(scores in prop::collection::vec(prop::array::uniform5(-1.0f64..1.0), 1..200)) {
        let mut per_layer = [0usize; LAYER_COUNT + 1];
        let mut reached = [0usize; LAYER_COUNT];
        for s in &scores {
            let d = route_scores(s);
            per_layer[d.deciding_layer.unwrap_or(0)] += 1;
            for l in 0..d.deciding_layer.unwrap_or(LAYER_COUNT) {
                reached[l] += 1;
            }
        }
        prop_assert_eq!(per_layer.iter().sum::<usize>(), scores.len());
        // flows reaching layer L+1 = flows reaching L minus those L claimed
        for l in 1..LAYER_COUNT {
            prop_assert_eq!(reached[l], reached[l - 1] - per_layer[l]);
        }
        prop_assert_eq!(reached[0], scores.len());
    }
}

#[test]
fn ten_record_hand_case() {
    // per record: which layers vote attack (bit l = layer l+1), and the
    // decision that pattern must produce
    let cases: [(u32, Prediction, Category, &str); 10] = [
        (0b00000, Prediction::Normal, Category::Normal, "normal"),
        (0b00001, Prediction::Dos, Category::Dos, "neptune"),
        (0b00010, Prediction::Probe, Category::Probe, "satan"),
        (0b00100, Prediction::U2R, Category::U2R, "rootkit"),
        (0b01000, Prediction::R2L, Category::R2L, "guess_passwd"),
        (0b10000, Prediction::Unknown, Category::R2L, "snmpguess"),
        (0b11111, Prediction::Dos, Category::Dos, "smurf"),
        (0b10110, Prediction::Probe, Category::Probe, "nmap"),
        (0b11000, Prediction::R2L, Category::Normal, "normal"),
        (0b10100, Prediction::U2R, Category::U2R, "perl"),
    ];
    let x = DMatrix::from_fn(10, FEATURE_DIM, |i, j| ((i * 7 + j * 3) % 10) as f64 / 10.0 + i as f64 * 1e-3);
    let layers = std::array::from_fn(|l| {
        let y: Vec<f64> = cases.iter().map(|c| if c.0 >> l & 1 == 1 { 1.0 } else { -1.0 }).collect();
        LayerModel::Knn(knn_train(&x, &y, 1).unwrap())
    });
    let model = CascadeModel::from_layers(unit_scaler(), Taxonomy::builtin(), RunConfig::default(), layers).unwrap();
    for (i, c) in cases.iter().enumerate() {
        let v = FeatureVector(std::array::from_fn(|j| x[(i, j)]));
        assert_eq!(model.classify_vector(&v).predicted, c.1, "record {i}");
    }

    let cats: Vec<Category> = cases.iter().map(|c| c.2).collect();
    let names: Vec<String> = cases.iter().map(|c| c.3.to_string()).collect();
    let report = evaluate_prepared(&model, &x, &cats, &names).unwrap();
    assert_eq!(report.records, 10);
    // attack versus normal: record 8 is a false alarm, everything else right
    let o = report.overall.counts;
    assert_eq!((o.tp, o.tn, o.fp, o.fn_), (8, 1, 1, 0));
    assert_eq!(report.decisions["R2L"]["Unknown"], 1);
    assert_eq!(report.decisions["Normal"]["R2L"], 1);
    let total: u64 = report.decisions.values().flat_map(|m| m.values()).sum();
    assert_eq!(total, 10);
    // surviving sets shrink by the number each layer claimed
    let reached: Vec<u64> = report.layers.iter().map(|l| l.surviving.counts.total()).collect();
    assert_eq!(reached, vec![10, 8, 6, 4, 2]);
    // snmpguess is a test-only name
    assert_eq!((report.novelty.new_attacks, report.novelty.new_detected), (1, 1));
    assert_eq!(report.novelty.known_attacks, 7);
}

fn small_config(seed: u64) -> RunConfig {
    RunConfig {
        seed,
        knn_k: 5,
        elm_n: 40,
        helm3: HelmWidths::new(8, 8, 40),
        helm4: HelmWidths::new(6, 6, 40),
        helm5: HelmWidths::new(6, 6, 40),
        ..RunConfig::default()
    }
}

#[test]
fn training_is_byte_deterministic_and_persists() {
    let rows = synthetic_dataset(1500, DEFAULT_MIX, 0.0, 21);
    let t = Taxonomy::builtin();
    let a = train_cascade(&rows, &t, &small_config(5)).unwrap();
    let b = train_cascade(&rows, &t, &small_config(5)).unwrap();
    let bytes = a.to_bytes();
    assert_eq!(bytes, b.to_bytes());
    assert_ne!(bytes, train_cascade(&rows, &t, &small_config(6)).unwrap().to_bytes());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.model");
    a.save(&path).unwrap();
    let back = CascadeModel::load(&path).unwrap();
    assert_eq!(back, a);
    let probe = synthetic_dataset(300, DEFAULT_MIX, 0.5, 22);
    for r in &probe {
        assert_eq!(back.classify_flow(r), a.classify_flow(r));
    }

    for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(CascadeModel::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    let mut corrupt = bytes.clone();
    corrupt[0] ^= 0xff;
    assert!(CascadeModel::from_bytes(&corrupt).is_err());
}

#[test]
fn training_requires_every_category() {
    let rows = synthetic_dataset(300, DEFAULT_MIX, 0.0, 3);
    let t = Taxonomy::builtin();
    let cats = t.label_records(&rows).unwrap();
    let kept: Vec<_> = rows.into_iter().zip(cats).filter(|(_, c)| *c != Category::U2R).map(|(r, _)| r).collect();
    assert!(train_cascade(&kept, &t, &small_config(1)).is_err());
}

#[test]
fn mismatched_layer_width_is_rejected() {
    let mut layers: [LayerModel; LAYER_COUNT] = std::array::from_fn(|_| LayerModel::Constant {
        dim: FEATURE_DIM,
        score: -1.0,
    });
    layers[2] = LayerModel::Constant { dim: 3, score: -1.0 };
    assert!(CascadeModel::from_layers(unit_scaler(), Taxonomy::builtin(), RunConfig::default(), layers).is_err());
}
