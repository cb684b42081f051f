use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use hearthcast::constrained::ConstrainedTreeConfig;
use hearthcast::data::HouseholdRecord;
use hearthcast::features::{LowConsumptionRule, FEATURE_SCHEMA};
use hearthcast::metrics::PriceConfig;
use hearthcast::models::{ForecastModel, ModelKind, ModelSpec, MODEL_FORMAT_VERSION};
use hearthcast::synth::{generate, GeneratorConfig};
use hearthcast_cli::server::{router, ExplainResponse, ModelInfo, PredictResponse, ServeState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fit(spec: ModelSpec) -> ForecastModel {
    let ds = generate(&GeneratorConfig {
        n: 1500,
        seed: 9,
        ..GeneratorConfig::default()
    })
    .unwrap();
    spec.fit(&ds, &LowConsumptionRule::default()).unwrap()
}

fn tree_model() -> ForecastModel {
    fit(ModelSpec::ConstrainedTree(ConstrainedTreeConfig {
        min_bucket: 30,
        ..ConstrainedTreeConfig::default()
    }))
}

fn app(model: ForecastModel) -> (Router, Arc<ServeState>) {
    let state = Arc::new(ServeState::new(model, PriceConfig::default()));
    (router(state.clone()), state)
}

fn household() -> Value {
    json!({
        "surface_m2": 82.5,
        "heating_type": "heat_pump",
        "water_heating_type": "electric",
        "cooking_type": "mixed",
        "occupants": 3,
        "house_type": "house",
        "tariff_index": "peak_offpeak",
        "max_power_kva": 9
    })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

#[tokio::test]
async fn predict_matches_in_process_model() {
    let model = tree_model();
    let record: HouseholdRecord = serde_json::from_value(household()).unwrap();
    let expected = model.predict(&record).kwh();
    let (app, _) = app(model);
    let (status, body) = call(&app, "POST", "/v1/predict", Some(household().to_string())).await;
    assert_eq!(status, StatusCode::OK);
    let got: PredictResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(got.car_kwh.to_bits(), expected.to_bits());
    assert_eq!(
        got.monthly_installment_eur,
        PriceConfig::default().monthly_installment(expected)
    );
}

#[tokio::test]
async fn explain_trace_reconstructs_the_prediction() {
    let (app, _) = app(tree_model());
    for surface in [18.0, 49.0, 50.0, 51.0, 82.5, 140.0, 320.0] {
        let mut body = household();
        body["surface_m2"] = json!(surface);
        body["occupants"] = json!(2);
        body["heating_type"] = json!("gas");
        body["water_heating_type"] = json!("gas");
        let (status, bytes) = call(&app, "POST", "/v1/explain", Some(body.to_string())).await;
        assert_eq!(status, StatusCode::OK);
        let e: ExplainResponse = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(e.trace.alpha + e.trace.beta * e.trace.surface, e.car_kwh);
        assert!(e.trace.steps.len() <= 7);
        assert!(e.text.contains("leaf: alpha + beta×surface"));
        let (_, p) = call(&app, "POST", "/v1/predict", Some(body.to_string())).await;
        let p: PredictResponse = serde_json::from_slice(&p).unwrap();
        assert_eq!(p.car_kwh, e.car_kwh);
    }
}

#[tokio::test]
async fn explain_on_other_kinds_is_a_conflict() {
    let (app, _) = app(fit(ModelSpec::default_for(ModelKind::Linear)));
    let (status, body) = call(&app, "POST", "/v1/explain", Some(household().to_string())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert!(v["error"].as_str().unwrap().contains("linear"));
}

#[tokio::test]
async fn error_statuses() {
    let (app, _) = app(tree_model());
    let (s, _) = call(&app, "POST", "/v1/predict", Some("{\"surface_m2\": 40,".into())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/v1/predict", Some("not json".into())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let mut unknown = household();
    unknown["heating_type"] = json!("coal");
    let (s, body) = call(&app, "POST", "/v1/predict", Some(unknown.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(String::from_utf8(body).unwrap().contains("coal"));

    let mut negative = household();
    negative["surface_m2"] = json!(-5);
    let (s, _) = call(&app, "POST", "/v1/predict", Some(negative.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let mut missing = household();
    missing.as_object_mut().unwrap().remove("occupants");
    let (s, _) = call(&app, "POST", "/v1/explain", Some(missing.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, _) = call(&app, "GET", "/v1/predict", None).await;
    assert_eq!(s, StatusCode::METHOD_NOT_ALLOWED);
}

#[tokio::test]
async fn model_metadata() {
    let (app, _) = app(tree_model());
    let (status, body) = call(&app, "GET", "/v1/model", None).await;
    assert_eq!(status, StatusCode::OK);
    let info: ModelInfo = serde_json::from_slice(&body).unwrap();
    assert_eq!(info.kind, "constrained_tree");
    assert_eq!(info.version, MODEL_FORMAT_VERSION);
    assert_eq!(info.schema, FEATURE_SCHEMA);
    assert!(info.explainable);
}

#[tokio::test]
async fn reload_swaps_the_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    tree_model().save(&path).unwrap();
    let state = Arc::new(ServeState::from_file(&path, PriceConfig::default()).unwrap());
    let app = router(state.clone());
    let before = state.current();

    fit(ModelSpec::default_for(ModelKind::Legacy)).save(&path).unwrap();
    state.reload().unwrap();
    let (_, body) = call(&app, "GET", "/v1/model", None).await;
    let info: ModelInfo = serde_json::from_slice(&body).unwrap();
    assert_eq!(info.kind, "legacy");
    // A request that grabbed the old snapshot still sees the old model.
    assert_eq!(before.model.kind(), ModelKind::ConstrainedTree);

    std::fs::write(&path, "{ broken").unwrap();
    assert!(state.reload().is_err());
    assert_eq!(state.current().model.kind(), ModelKind::Legacy);
}

#[tokio::test]
async fn concurrent_requests_agree() {
    let (app, _) = app(tree_model());
    let body = household().to_string();
    let handles: Vec<_> = (0..32)
        .map(|_| {
            let (app, body) = (app.clone(), body.clone());
            tokio::spawn(async move { call(&app, "POST", "/v1/predict", Some(body)).await })
        })
        .collect();
    let mut bodies = Vec::new();
    for h in handles {
        let (status, b) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        bodies.push(b);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}
