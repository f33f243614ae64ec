//! JSON HTTP API over a shared trace.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dinekit_core::dine::{detect_uncertain, dominance, render_counterfactual, Dine, Thresholds};
use dinekit_core::exec::Execution;
use dinekit_core::trace::{DineCounts, StandardizedView, Trace, TraceRecord};
use serde::Serialize;
use serde_json::{json, Value};

use crate::runner::Shared;

#[derive(Clone)]
struct AppState {
    shared: Arc<Shared>,
    execution: Execution,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn bad(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            field: Some(field.into()),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: message.into(),
            field: None,
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
            field: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = match self.field {
            Some(f) => json!({ "error": self.message, "field": f }),
            None => json!({ "error": self.message }),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(shared: Arc<Shared>, execution: Execution) -> Router {
    Router::new()
        .route("/api/meta", get(meta))
        .route("/api/trace", get(trace_window))
        .route("/api/dominance/{t}", get(dominance_at))
        .route("/api/dines", get(dines))
        .route("/api/counterfactual/{t}", get(counterfactual))
        .route("/api/thresholds", post(set_thresholds))
        .with_state(AppState { shared, execution })
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(shared: Arc<Shared>, execution: Execution, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {addr}: {e}"))?;
    log::info!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(shared, execution))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Parses the allowed query keys; anything else is a 400 naming the key.
fn parse_query(
    q: &HashMap<String, String>,
    allowed: &[&'static str],
) -> Result<HashMap<&'static str, f64>, ApiError> {
    let mut out = HashMap::new();
    for (k, v) in q {
        let Some(&key) = allowed.iter().find(|a| **a == k.as_str()) else {
            return Err(ApiError::bad(k.as_str(), format!("unknown query parameter '{k}'")));
        };
        let x: f64 = v
            .parse()
            .map_err(|_| ApiError::bad(key, format!("{key} must be a number, got '{v}'")))?;
        if !x.is_finite() {
            return Err(ApiError::bad(key, format!("{key} must be finite")));
        }
        out.insert(key, x);
    }
    Ok(out)
}

fn timestep_param(
    q: &HashMap<&'static str, f64>,
    key: &'static str,
) -> Result<Option<u64>, ApiError> {
    match q.get(key) {
        None => Ok(None),
        Some(&v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(Some(v as u64)),
        Some(v) => Err(ApiError::bad(key, format!("{key} must be a non-negative integer, got {v}"))),
    }
}

fn window_params(q: &HashMap<&'static str, f64>) -> Result<(Option<u64>, Option<u64>), ApiError> {
    let from = timestep_param(q, "from")?;
    let to = timestep_param(q, "to")?;
    if let (Some(f), Some(t)) = (from, to) {
        if f > t {
            return Err(ApiError::bad("from", format!("from ({f}) is after to ({t})")));
        }
    }
    Ok((from, to))
}

fn path_timestep(raw: &str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad("t", format!("timestep must be a non-negative integer, got '{raw}'")))
}

fn record_at(trace: &Trace, t: u64) -> Result<&TraceRecord, ApiError> {
    trace.get(t).ok_or_else(|| match (trace.first_timestep(), trace.last_timestep()) {
        (Some(a), Some(b)) => ApiError::not_found(format!("timestep {t} not in trace (range {a}..={b})")),
        _ => ApiError::not_found(format!("timestep {t} not in trace (trace is empty)")),
    })
}

#[derive(Serialize)]
struct MetaResponse {
    channel_names: Vec<String>,
    action_names: Vec<String>,
    state_names: Vec<String>,
    channel_weights: Vec<f64>,
    n_actions: usize,
    n_channels: usize,
    trace_length: usize,
    first_timestep: Option<u64>,
    last_timestep: Option<u64>,
    thresholds: Thresholds,
    config_digest: String,
}

async fn meta(State(s): State<AppState>) -> Json<MetaResponse> {
    let thresholds = s.shared.thresholds();
    let trace = s.shared.trace.read();
    let m = trace.meta();
    Json(MetaResponse {
        channel_names: m.channel_names.clone(),
        action_names: m.action_names.clone(),
        state_names: m.state_names.clone(),
        channel_weights: m.channel_weights.clone(),
        n_actions: m.n_actions(),
        n_channels: m.n_channels(),
        trace_length: trace.len(),
        first_timestep: trace.first_timestep(),
        last_timestep: trace.last_timestep(),
        thresholds,
        config_digest: m.config_digest.clone(),
    })
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct TraceResponse {
    pub timesteps: Vec<u64>,
    pub state_names: Vec<String>,
    /// `variables x steps`.
    pub raw_state: Vec<Vec<f64>>,
    pub standardized: StandardizedView,
    /// `channels x steps`.
    pub rewards: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub exploratory: Vec<bool>,
    pub epsilon: Vec<f64>,
}

async fn trace_window(
    State(s): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<TraceResponse> {
    let q = parse_query(&q, &["from", "to"])?;
    let (from, to) = window_params(&q)?;
    let trace = s.shared.trace.read();
    let window = trace.window(from, to).map_err(|e| ApiError::bad("from", e.to_string()))?;
    let standardized = trace.standardize(from, to).map_err(|e| ApiError::bad("from", e.to_string()))?;
    let dim = standardized.variables.len();
    let k = trace.meta().n_channels();
    Ok(Json(TraceResponse {
        timesteps: window.iter().map(|r| r.timestep).collect(),
        state_names: trace.meta().state_names.clone(),
        raw_state: (0..dim).map(|i| window.iter().map(|r| r.raw_state[i]).collect()).collect(),
        standardized,
        rewards: (0..k).map(|c| window.iter().map(|r| r.reward[c]).collect()).collect(),
        actions: window.iter().map(|r| r.action).collect(),
        exploratory: window.iter().map(|r| r.exploratory).collect(),
        epsilon: window.iter().map(|r| r.epsilon).collect(),
    }))
}

async fn dominance_at(State(s): State<AppState>, Path(raw): Path<String>) -> ApiResult<Value> {
    let t = path_timestep(&raw)?;
    let trace = s.shared.trace.read();
    let r = record_at(&trace, t)?;
    let chart = dominance(&r.q_values, r.action).at(t);
    let dominant_channel_name = trace.meta().channel_names.get(chart.dominant_channel).cloned();
    let mut v = serde_json::to_value(&chart).map_err(|e| ApiError::internal(e.to_string()))?;
    v["dominant_channel_name"] = json!(dominant_channel_name);
    v["relative_totals"] = json!(chart.relative_totals());
    v["absolute_totals"] = json!(chart.absolute_totals());
    Ok(Json(v))
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct DineEntry {
    pub timestep: u64,
    pub dines: Vec<Dine>,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct DinesResponse {
    pub thresholds: Thresholds,
    pub from: Option<u64>,
    pub to: Option<u64>,
    pub steps: usize,
    pub counts: DineCounts,
    /// Timesteps with at least one element, in order.
    pub dines: Vec<DineEntry>,
}

fn thresholds_from(q: &HashMap<&'static str, f64>, live: Thresholds) -> Result<Thresholds, ApiError> {
    let t = Thresholds {
        rho: q.get("rho").copied().unwrap_or(live.rho),
        phi: q.get("phi").copied().unwrap_or(live.phi),
    };
    if !(0.0..=1.0).contains(&t.rho) {
        return Err(ApiError::bad("rho", format!("rho must lie in [0, 1], got {}", t.rho)));
    }
    if t.phi < 0.0 {
        return Err(ApiError::bad("phi", format!("phi must be >= 0, got {}", t.phi)));
    }
    Ok(t)
}

async fn dines(
    State(s): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<DinesResponse> {
    let q = parse_query(&q, &["rho", "phi", "from", "to"])?;
    let (from, to) = window_params(&q)?;
    let thresholds = thresholds_from(&q, s.shared.thresholds())?;
    let trace = s.shared.trace.read();
    let window = trace.window(from, to).map_err(|e| ApiError::bad("from", e.to_string()))?;
    let sets = trace
        .refilter(thresholds, from, to, s.execution)
        .map_err(|e| ApiError::bad("rho", e.to_string()))?;
    let counts = DineCounts::of(sets.iter().map(Vec::as_slice));
    let dines = window
        .iter()
        .zip(sets)
        .filter(|(_, d)| !d.is_empty())
        .map(|(r, dines)| DineEntry {
            timestep: r.timestep,
            dines,
        })
        .collect();
    Ok(Json(DinesResponse {
        thresholds,
        from,
        to,
        steps: window.len(),
        counts,
        dines,
    }))
}

async fn counterfactual(
    State(s): State<AppState>,
    Path(raw): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Value> {
    let t = path_timestep(&raw)?;
    let q = parse_query(&q, &["rho"])?;
    let thresholds = thresholds_from(&q, s.shared.thresholds())?;
    let trace = s.shared.trace.read();
    let r = record_at(&trace, t)?;
    let text = match detect_uncertain(&r.q_values, r.action, thresholds.rho) {
        Some(d) => {
            let chart = dominance(&r.q_values, r.action).at(t);
            let m = trace.meta();
            render_counterfactual(&d.at(t), &chart, &m.channel_names, &m.action_names)
                .map_err(|e| ApiError::internal(e.to_string()))?
        }
        None => String::new(),
    };
    Ok(Json(json!({ "timestep": t, "rho": thresholds.rho, "text": text })))
}

async fn set_thresholds(State(s): State<AppState>, body: Bytes) -> ApiResult<Value> {
    let v: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad("body", format!("body must be a JSON object: {e}")))?;
    let obj = v
        .as_object()
        .ok_or_else(|| ApiError::bad("body", "body must be a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| *k != "rho" && *k != "phi") {
        return Err(ApiError::bad(k.as_str(), format!("unknown field '{k}'")));
    }
    let num = |key: &'static str| -> Result<f64, ApiError> {
        obj.get(key)
            .ok_or_else(|| ApiError::bad(key, format!("missing field {key}")))?
            .as_f64()
            .ok_or_else(|| ApiError::bad(key, format!("{key} must be a number")))
    };
    let requested = Thresholds {
        rho: num("rho")?,
        phi: num("phi")?,
    };
    let checked: HashMap<&'static str, f64> = [("rho", requested.rho), ("phi", requested.phi)].into();
    let requested = thresholds_from(&checked, requested)?;
    let previous = s
        .shared
        .set_thresholds(requested)
        .map_err(|e| ApiError::bad("rho", e.to_string()))?;
    Ok(Json(json!({ "previous": previous, "current": requested })))
}
