//! HTTP API contract, driven in-process through the router.

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use dinekit::config::RunConfig;
use dinekit::runner::{build, Shared};
use dinekit::server::{router, DinesResponse, TraceResponse};
use dinekit_core::dine::{EnvModelConfig, Thresholds};
use dinekit_core::exec::Execution;
use serde_json::Value;
use tower::ServiceExt;

const STEPS: u64 = 80;

fn recorded() -> Arc<Shared> {
    let cfg = RunConfig {
        steps: STEPS,
        seed: 5,
        env_model: EnvModelConfig {
            min_samples: 30,
            retrain_interval: 30,
            epochs: 2,
            ..EnvModelConfig::default()
        },
        ..RunConfig::default()
    };
    let mut runner = build(&cfg).unwrap();
    runner.run(STEPS).unwrap();
    runner.shared()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_owned())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, "GET", uri, None).await
}

#[tokio::test]
async fn meta_describes_the_run() {
    let app = router(recorded(), Execution::Sequential);
    let (status, v) = get(&app, "/api/meta").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["n_actions"], 5);
    assert_eq!(v["n_channels"], 3);
    assert_eq!(v["trace_length"], STEPS);
    assert_eq!(v["channel_weights"], serde_json::json!([4.0, 2.0, 1.0]));
    assert_eq!(v["channel_names"][0], "User Satisfaction");
    assert_eq!(v["thresholds"]["rho"], Thresholds::default().rho);
}

#[tokio::test]
async fn trace_window_serves_stored_values_exactly() {
    let shared = recorded();
    let app = router(shared.clone(), Execution::Sequential);
    let (status, v) = get(&app, "/api/trace?from=10&to=29").await;
    assert_eq!(status, StatusCode::OK);
    let resp: TraceResponse = serde_json::from_value(v).unwrap();
    assert_eq!(resp.timesteps, (10..=29).collect::<Vec<_>>());
    let trace = shared.trace.read();
    for (i, t) in resp.timesteps.iter().enumerate() {
        let r = trace.get(*t).unwrap();
        assert_eq!(resp.actions[i], r.action);
        assert_eq!(resp.exploratory[i], r.exploratory);
        for (c, series) in resp.rewards.iter().enumerate() {
            assert_eq!(series[i].to_bits(), r.reward[c].to_bits());
        }
        for (d, series) in resp.raw_state.iter().enumerate() {
            assert_eq!(series[i].to_bits(), r.raw_state[d].to_bits());
        }
    }
    assert_eq!(resp.standardized, trace.standardize(Some(10), Some(29)).unwrap());
}

#[tokio::test]
async fn dines_equal_refilter() {
    let shared = recorded();
    let app = router(shared.clone(), Execution::Sequential);
    for (rho, phi) in [(0.0, 0.0), (0.3, 0.1), (1.0, 0.5)] {
        let (status, v) = get(&app, &format!("/api/dines?rho={rho}&phi={phi}&from=5&to=70")).await;
        assert_eq!(status, StatusCode::OK);
        let resp: DinesResponse = serde_json::from_value(v).unwrap();
        let expected = shared
            .trace
            .read()
            .refilter(Thresholds { rho, phi }, Some(5), Some(70), Execution::Parallel)
            .unwrap();
        let served: Vec<_> = resp.dines.iter().map(|e| (e.timestep, e.dines.clone())).collect();
        let want: Vec<_> = (5..=70)
            .zip(expected)
            .filter(|(_, d)| !d.is_empty())
            .collect();
        assert_eq!(served, want, "rho={rho} phi={phi}");
        assert_eq!(resp.steps, 66);
    }
}

#[tokio::test]
async fn omitted_thresholds_default_to_live() {
    let shared = recorded();
    let app = router(shared.clone(), Execution::Sequential);
    let (_, v) = get(&app, "/api/dines").await;
    let resp: DinesResponse = serde_json::from_value(v).unwrap();
    assert_eq!(resp.thresholds, shared.thresholds());
    let live: Vec<_> = shared
        .trace
        .read()
        .records()
        .iter()
        .filter(|r| !r.dines.is_empty())
        .map(|r| (r.timestep, r.dines.clone()))
        .collect();
    let served: Vec<_> = resp.dines.into_iter().map(|e| (e.timestep, e.dines)).collect();
    assert_eq!(served, live);
}

#[tokio::test]
async fn dominance_and_counterfactual() {
    let app = router(recorded(), Execution::Sequential);
    let (status, v) = get(&app, "/api/dominance/40").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["timestep"], 40);
    for row in v["relative"].as_array().unwrap() {
        let min = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).fold(f64::MAX, f64::min);
        assert_eq!(min, 0.0);
    }
    let (status, v) = get(&app, "/api/counterfactual/40?rho=0").await;
    assert_eq!(status, StatusCode::OK);
    let text = v["text"].as_str().unwrap();
    assert!(text.is_empty() || text.starts_with("To reach the goal "), "{text}");
}

#[tokio::test]
async fn unknown_timestep_is_404() {
    let app = router(recorded(), Execution::Sequential);
    for uri in ["/api/dominance/80", "/api/counterfactual/9999"] {
        let (status, v) = get(&app, uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(v["error"].as_str().unwrap().contains("not in trace"));
    }
}

#[tokio::test]
async fn malformed_parameters_are_400_with_field() {
    let app = router(recorded(), Execution::Sequential);
    for (uri, field) in [
        ("/api/dines?rho=abc", "rho"),
        ("/api/dines?rho=1.5", "rho"),
        ("/api/dines?phi=-1", "phi"),
        ("/api/dines?from=3.5", "from"),
        ("/api/trace?from=9&to=2", "from"),
        ("/api/trace?window=3", "window"),
        ("/api/dominance/minus-one", "t"),
        ("/api/counterfactual/3?rho=2", "rho"),
    ] {
        let (status, v) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(v["field"], field, "{uri}");
    }
}

#[tokio::test]
async fn posting_thresholds_returns_previous_values() {
    let shared = recorded();
    let app = router(shared.clone(), Execution::Sequential);
    let before = shared.thresholds();
    let (status, v) = call(&app, "POST", "/api/thresholds", Some(r#"{"rho":0.7,"phi":0.25}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["previous"]["rho"], before.rho);
    assert_eq!(v["previous"]["phi"], before.phi);
    assert_eq!(shared.thresholds(), Thresholds { rho: 0.7, phi: 0.25 });

    let (_, v) = call(&app, "POST", "/api/thresholds", Some(r#"{"rho":0.1,"phi":0.0}"#)).await;
    assert_eq!(v["previous"]["rho"], 0.7);

    for (body, field) in [
        (r#"{"rho":"x","phi":0.1}"#, "rho"),
        (r#"{"rho":0.1}"#, "phi"),
        (r#"{"rho":1.1,"phi":0.1}"#, "rho"),
        (r#"{"rho":0.1,"phi":-0.1}"#, "phi"),
        (r#"{"rho":0.1,"phi":0.1,"psi":1}"#, "psi"),
        ("not json", "body"),
    ] {
        let (status, v) = call(&app, "POST", "/api/thresholds", Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(v["field"], field, "{body}");
    }
    assert_eq!(shared.thresholds(), Thresholds { rho: 0.1, phi: 0.0 });
}

#[tokio::test]
async fn gets_do_not_mutate_the_trace() {
    let shared = recorded();
    let app = router(shared.clone(), Execution::Sequential);
    let before = shared.trace.read().clone();
    for uri in ["/api/meta", "/api/trace", "/api/dines?rho=0", "/api/dominance/3", "/api/counterfactual/3"] {
        let (a, va) = get(&app, uri).await;
        let (b, vb) = get(&app, uri).await;
        assert_eq!((a, &va), (b, &vb), "{uri}");
    }
    assert_eq!(*shared.trace.read(), before);
}
