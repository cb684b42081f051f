//! `/v1` HTTP API over one loaded model.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hearthcast::constrained::ExplanationTrace;
use hearthcast::data::{HouseholdRecord, SCHEMA_VERSION};
use hearthcast::features::FEATURE_SCHEMA;
use hearthcast::metrics::PriceConfig;
use hearthcast::models::{ForecastModel, MODEL_FORMAT_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::error::Category;

/// The model being served and where it came from.
#[derive(Debug)]
pub struct Snapshot {
    pub model: ForecastModel,
    pub source: Option<PathBuf>,
}

/// Shared by every request. Handlers clone the current `Arc<Snapshot>`
/// and never hold the lock while predicting, so a reload swaps the model
/// without touching requests already in flight.
#[derive(Debug)]
pub struct ServeState {
    snapshot: RwLock<Arc<Snapshot>>,
    pub price: PriceConfig,
}

impl ServeState {
    pub fn new(model: ForecastModel, price: PriceConfig) -> Self {
        Self {
            snapshot: RwLock::new(Arc::new(Snapshot { model, source: None })),
            price,
        }
    }

    pub fn from_file(path: impl AsRef<Path>, price: PriceConfig) -> hearthcast::Result<Self> {
        let path = path.as_ref();
        let model = ForecastModel::load(path)?;
        Ok(Self {
            snapshot: RwLock::new(Arc::new(Snapshot {
                model,
                source: Some(path.to_path_buf()),
            })),
            price,
        })
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    /// Re-reads the model file. On error the old model stays in place.
    pub fn reload(&self) -> hearthcast::Result<()> {
        let Some(path) = self.current().source.clone() else {
            return Ok(());
        };
        let model = ForecastModel::load(&path)?;
        self.replace(model, Some(path));
        Ok(())
    }

    pub fn replace(&self, model: ForecastModel, source: Option<PathBuf>) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(Snapshot { model, source });
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PredictResponse {
    pub car_kwh: f64,
    pub monthly_installment_eur: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ExplainResponse {
    pub car_kwh: f64,
    pub trace: ExplanationTrace,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelInfo {
    pub kind: String,
    pub version: u32,
    pub schema: String,
    pub record_schema: String,
    pub explainable: bool,
    pub unit_price_eur_per_kwh: f64,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

/// 400 when the body is not JSON, 422 when it is JSON but not a valid
/// household (unknown category, missing field, failed range check).
fn parse_record(body: &[u8]) -> Result<HouseholdRecord, ApiError> {
    let record: HouseholdRecord = serde_json::from_slice(body).map_err(|e| match e.classify() {
        Category::Syntax | Category::Eof | Category::Io => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
        Category::Data => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    })?;
    record
        .validate()
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(record)
}

async fn predict(State(state): State<Arc<ServeState>>, body: Bytes) -> Result<Json<PredictResponse>, ApiError> {
    let record = parse_record(&body)?;
    let car = state.current().model.predict(&record).kwh();
    Ok(Json(PredictResponse {
        car_kwh: car,
        monthly_installment_eur: state.price.monthly_installment(car),
    }))
}

async fn explain(State(state): State<Arc<ServeState>>, body: Bytes) -> Result<Json<ExplainResponse>, ApiError> {
    let record = parse_record(&body)?;
    let snapshot = state.current();
    let (car, trace) = snapshot.model.explain(&record).ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            format!("model kind '{}' has no decision trace", snapshot.model.kind()),
        )
    })?;
    Ok(Json(ExplainResponse {
        car_kwh: car.kwh(),
        text: trace.render_text(),
        trace,
    }))
}

async fn model_info(State(state): State<Arc<ServeState>>) -> Json<ModelInfo> {
    let snapshot = state.current();
    let kind = snapshot.model.kind();
    Json(ModelInfo {
        kind: kind.id().to_string(),
        version: MODEL_FORMAT_VERSION,
        schema: FEATURE_SCHEMA.to_string(),
        record_schema: SCHEMA_VERSION.to_string(),
        explainable: matches!(kind, hearthcast::models::ModelKind::ConstrainedTree),
        unit_price_eur_per_kwh: state.price.unit_price,
    })
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/explain", post(explain))
        .route("/v1/model", get(model_info))
        .with_state(state)
}

#[cfg(unix)]
async fn reload_on_sighup(state: Arc<ServeState>) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hup) = signal(SignalKind::hangup()) else {
        eprintln!("hot reload disabled: cannot listen for SIGHUP");
        return;
    };
    while hup.recv().await.is_some() {
        match state.reload() {
            Ok(()) => eprintln!("model reloaded ({})", state.current().model.kind()),
            Err(e) => eprintln!("reload failed, keeping the previous model: {e}"),
        }
    }
}

/// Serves until Ctrl-C. On unix, SIGHUP re-reads the model file.
pub async fn serve(state: Arc<ServeState>, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    #[cfg(unix)]
    tokio::spawn(reload_on_sighup(state.clone()));
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
