use std::sync::{Arc, OnceLock};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use serde_json::{json, Value};
use tower::ServiceExt;

use tops_core::cli::{train_horizon, RunConfig};
use tops_core::cohort::synth::{FeatureDistribution, SynthFeature};
use tops_core::cohort::{impute_with_fills, synth_cohort, SynthSpec};
use tops_core::service::{http::router, Service};
use tops_core::tree::TreeOfPredictors;

fn models() -> &'static Vec<TreeOfPredictors> {
    static MODELS: OnceLock<Vec<TreeOfPredictors>> = OnceLock::new();
    MODELS.get_or_init(|| {
        let cohort = synth_cohort(&SynthSpec::planted_two_region(2000, 0.2, 13)).unwrap().cohort;
        let (cohort, fills) = impute_with_fills(&cohort).unwrap();
        let config = RunConfig {
            horizons: vec![180.0, 365.0],
            seed: 13,
            ..RunConfig::default()
        };
        config
            .horizons
            .iter()
            .map(|&h| train_horizon(&cohort, &fills, h, &config).unwrap().0)
            .collect()
    })
}

fn app() -> axum::Router {
    router(Arc::new(Service::new(models().clone()).unwrap()))
}

async fn call(method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn predict(body: Value) -> (StatusCode, Value) {
    call("POST", "/api/v1/predict", Some(body)).await
}

#[tokio::test]
async fn health_lists_models() {
    let (status, body) = call("GET", "/api/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok", "models": 2, "horizons": [180.0, 365.0]}));
}

#[tokio::test]
async fn model_info_describes_features_and_trees() {
    let (status, body) = call("GET", "/api/v1/model-info", None).await;
    assert_eq!(status, StatusCode::OK);
    let features = body["features"].as_array().unwrap();
    assert_eq!(features.len(), 5);
    assert_eq!(features[0]["name"], "x0");
    assert_eq!(features[0]["kind"], "continuous");
    assert!(features[0]["fill"].is_number());
    let range = features[0]["range"].as_array().unwrap();
    assert!(range[0].as_f64().unwrap() >= 0.0 && range[1].as_f64().unwrap() <= 1.0);
    assert_eq!(body["trees"].as_array().unwrap().len(), 2);
    assert_eq!(body["schema_fingerprint"].as_str().unwrap().len(), 64);
}

#[tokio::test]
async fn predict_returns_each_horizon_and_a_curve() {
    let (status, body) = predict(json!({"features": {"x0": 0.3, "x1": 0.5, "x2": -1.0, "x3": 0.0, "x4": 1.0}})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let preds = body["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 2);
    assert_eq!(preds[0]["horizon"], 180.0);
    assert_eq!(preds[0]["leaf_path"][0], 0);
    let curve: Vec<(f64, f64)> = serde_json::from_value(body["survival_curve"].clone()).unwrap();
    assert!(curve.len() >= 50);
    assert!(curve.iter().any(|&(t, s)| t == 180.0 && s == preds[0]["probability"].as_f64().unwrap()));
    assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12 && w[1].0 > w[0].0));
    assert!(body.get("warnings").is_none());

    let (status, body) = predict(json!({"features": {"x0": 0.3}, "horizons": [365.0]})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["predictions"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn request_errors_are_structured() {
    let (status, body) = predict(json!({"features": {"age": 50}})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "unknown_feature");
    assert_eq!(body["stage"], "validate");

    let (status, body) = predict(json!({"features": {"x0": "high"}})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid_value");

    let (status, body) = predict(json!({"features": {"x0": [1, 2]}})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid_value");

    let (status, body) = predict(json!({"features": {}, "horizons": [90.0]})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "unknown_horizon");

    let (status, body) = predict(json!({"features": 3})).await;
    assert!(status.is_client_error());
    assert_eq!(body["code"], "bad_request");

    let (status, body) = call("GET", "/api/v1/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
}

#[tokio::test]
async fn out_of_range_values_warn() {
    let (status, body) = predict(json!({"features": {"x0": 7.5}})).await;
    assert_eq!(status, StatusCode::OK);
    let warnings = body["warnings"].as_array().unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].as_str().unwrap().contains("x0"));
}

#[tokio::test]
async fn omitted_features_equal_their_fill_values() {
    let (_, info) = call("GET", "/api/v1/model-info", None).await;
    let mut full = serde_json::Map::new();
    for f in info["features"].as_array().unwrap() {
        full.insert(f["name"].as_str().unwrap().into(), f["fill"].clone());
    }
    full.insert("x0".into(), json!(0.7));
    let (_, with_fills) = predict(json!({ "features": full })).await;
    let (_, omitted) = predict(json!({"features": {"x0": 0.7, "x2": null}})).await;
    assert_eq!(with_fills["predictions"], omitted["predictions"]);
}

#[tokio::test]
async fn whatif_toggles_start_from_the_base() {
    let base = json!({"features": {"x0": 0.3, "x1": 1.0}});
    let (_, direct) = predict(base.clone()).await;

    let (status, body) = call(
        "POST",
        "/api/v1/whatif",
        Some(json!({"base": base, "toggles": [{"feature": "x1", "value": 1.0}, {"feature": "x0", "value": 0.8}]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let arr = body.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    assert_eq!(arr[0], direct);
    // Setting a feature to its base value changes nothing.
    assert_eq!(arr[1], direct);

    // The planted trees split the root on x0, so crossing it changes the path.
    let root = &models()[0].shape().splits[0];
    assert_eq!(root.feature, "x0");
    assert!(0.3 < root.threshold && root.threshold <= 0.8, "root threshold {}", root.threshold);
    assert_ne!(arr[2]["predictions"][0]["leaf_path"], arr[0]["predictions"][0]["leaf_path"]);

    let (status, body) = call(
        "POST",
        "/api/v1/whatif",
        Some(json!({"base": {"features": {}}, "toggles": [{"feature": "bogus", "value": 1}]})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "unknown_feature");
}

#[test]
fn service_rejects_inconsistent_models() {
    let mut two = models().clone();
    two[1].horizon = two[0].horizon;
    assert!(Service::new(two).is_err());

    let mut other = models().clone();
    other[1].schema_fingerprint = "0".repeat(64);
    assert!(Service::new(other).is_err());

    assert!(Service::new(Vec::new()).is_err());
}

#[tokio::test]
async fn empty_toggle_list_is_the_base_alone() {
    let base = json!({"features": {"x0": 0.6}});
    let (_, direct) = predict(base.clone()).await;
    let (status, body) = call("POST", "/api/v1/whatif", Some(json!({"base": base, "toggles": []}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([direct]));
}

#[test]
fn unused_feature_does_not_change_the_response() {
    // A binary flag that is 0 for every training row: no split can use it.
    let mut spec = SynthSpec::planted_two_region(1500, 0.2, 23);
    spec.features.push(SynthFeature {
        name: "flag".into(),
        distribution: FeatureDistribution::Bernoulli { p: 0.0 },
    });
    for r in &mut spec.regions {
        r.coefficients.push(0.0);
    }
    let cohort = synth_cohort(&spec).unwrap().cohort;
    let (cohort, fills) = impute_with_fills(&cohort).unwrap();
    let config = RunConfig {
        horizons: vec![180.0, 365.0],
        ..RunConfig::default()
    };
    let mut models: Vec<TreeOfPredictors> = config
        .horizons
        .iter()
        .map(|&h| train_horizon(&cohort, &fills, h, &config).unwrap().0)
        .collect();
    let col = cohort.schema.width() - 1;
    for m in &mut models {
        assert!(m.shape().splits.iter().all(|s| s.feature != "flag"));
        for n in &mut m.nodes {
            n.predictor.coefficients[col] = 0.0;
        }
    }
    let service = Service::new(models).unwrap();
    let request = |flag: u8| {
        let mut r = tops_core::service::PredictRequest::default();
        r.features.insert("x0".into(), json!(0.4));
        r.features.insert("x2".into(), json!(-1.1));
        r.features.insert("flag".into(), json!(flag));
        r
    };
    assert_eq!(service.handle_predict(&request(0)).unwrap(), service.handle_predict(&request(1)).unwrap());
}

#[test]
fn model_info_shapes_match_saved_files() {
    let dir = tempfile::tempdir().unwrap();
    for m in models() {
        tops_core::tree::save_model(m, &dir.path().join(tops_core::cli::model_file_name(m.horizon))).unwrap();
    }
    let loaded = tops_core::cli::load_models_dir(dir.path()).unwrap();
    let info = Service::new(loaded).unwrap().handle_model_info();
    for (t, m) in info.trees.iter().zip(models()) {
        let text = std::fs::read_to_string(dir.path().join(tops_core::cli::model_file_name(m.horizon))).unwrap();
        let file: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(t.shape.nodes, file["nodes"].as_array().unwrap().len());
    }
    assert_eq!(info.schema, models()[0].schema);
}
