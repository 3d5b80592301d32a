//! The JSON API over an in-process router.

mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{lab_results, request, synthetic};
use spade_core::{EndpointSpec, PolicyConfig, PolicyKind};
use spade_service::{router, CampaignStore};

struct Api {
    _dir: tempfile::TempDir,
    app: axum::Router,
}

impl Api {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(CampaignStore::open(dir.path()).unwrap());
        Api {
            app: router(store),
            _dir: dir,
        }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let body = match body {
            Some(v) => Body::from(serde_json::to_vec(&v).unwrap()),
            None => Body::empty(),
        };
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body)
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn full_cycle_over_http() {
    let api = Api::new();
    let ds = synthetic(150, 30);
    let req = request(&ds, PolicyKind::Spade, PolicyConfig::default(), vec![EndpointSpec::average_top10(8.0)], 1);
    let (status, created) = api.call(Method::POST, "/campaigns", Some(serde_json::to_value(&req).unwrap())).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    assert_eq!(created["campaign_id"], "c000001");
    assert_eq!(created["seen_count"], 0);
    assert_eq!(created["schema_version"], 1);

    let (status, list) = api.call(Method::GET, "/campaigns", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list["campaigns"], json!(["c000001"]));

    let (status, first) = api.call(Method::POST, "/campaigns/c000001/suggest", None).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    assert_eq!(first["repeated"], false);
    let batch = strings(&first["batch"]);
    assert_eq!(batch.len(), 10);
    let (_, again) = api.call(Method::POST, "/campaigns/c000001/suggest", Some(json!({}))).await;
    assert_eq!(again["repeated"], true);
    assert_eq!(strings(&again["batch"]), batch);

    let results = serde_json::to_value(lab_results(&ds, &batch)).unwrap();
    let (status, summary) = api.call(Method::POST, "/campaigns/c000001/results", Some(results)).await;
    assert_eq!(status, StatusCode::OK, "{summary}");
    assert_eq!(summary["seen_count"], 10);
    assert_eq!(summary["cycles"][0]["status"], "complete");
    assert!(summary["pending_batch"].is_null());

    let (status, state) = api.call(Method::GET, "/campaigns/c000001", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state, summary);

    let (status, events) = api.call(Method::GET, "/campaigns/c000001/events", None).await;
    assert_eq!(status, StatusCode::OK);
    let kinds: Vec<&str> = events["events"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["created", "batch_suggested", "results_submitted"]);
}

#[tokio::test]
async fn errors_carry_codes_and_statuses() {
    let api = Api::new();
    let ds = synthetic(60, 31);
    let (status, body) = api.call(Method::GET, "/campaigns/c000042", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_campaign");

    let (status, body) = api.call(Method::POST, "/campaigns", Some(json!({"dim": 3}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "invalid_request");

    let mut req = serde_json::to_value(request(&ds, PolicyKind::Random, PolicyConfig::default(), vec![EndpointSpec::min_top3(8.0)], 0)).unwrap();
    req["schema_version"] = json!(2);
    let (status, body) = api.call(Method::POST, "/campaigns", Some(req.clone())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "schema_version");

    req["schema_version"] = json!(1);
    req["config"]["batch_size"] = json!(61);
    let (_, body) = api.call(Method::POST, "/campaigns", Some(req.clone())).await;
    assert_eq!(body["error"], "batch_too_large");

    req["config"]["batch_size"] = json!(10);
    api.call(Method::POST, "/campaigns", Some(req)).await;
    let (_, first) = api.call(Method::POST, "/campaigns/c000001/suggest", None).await;
    let batch = strings(&first["batch"]);
    let part = serde_json::to_value(lab_results(&ds, &batch[..2])).unwrap();
    api.call(Method::POST, "/campaigns/c000001/results", Some(part.clone())).await;

    let (status, body) = api.call(Method::POST, "/campaigns/c000001/results", Some(part)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "duplicate_observation");
    let (status, body) = api.call(Method::POST, "/campaigns/c000001/suggest", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "pending_batch");
    let (status, body) = api.call(Method::POST, "/campaigns/c000001/suggest", Some(json!({"override": true}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["cycle"], 1);

    let bad = json!({"schema_version": 1, "results": [{"ligand_id": "ghost", "pic": 7.0}]});
    let (status, body) = api.call(Method::POST, "/campaigns/c000001/results", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "unknown_ligand");
}

#[tokio::test]
async fn dense_embeddings_are_accepted() {
    let api = Api::new();
    let ligands: Vec<Value> = (0..30)
        .map(|i| json!({"id": format!("d{i}"), "embedding": [i as f64 * 0.1, 1.0 - i as f64 * 0.03, 0.5]}))
        .collect();
    let req = json!({
        "schema_version": 1,
        "dim": 3,
        "ligands": ligands,
        "policy": "gp-ucb",
        "config": {"batch_size": 5},
        "seed": 9
    });
    let (status, body) = api.call(Method::POST, "/campaigns", Some(req)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["endpoints"].as_array().unwrap().len(), 2);
    let (status, body) = api.call(Method::POST, "/campaigns/c000001/suggest", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["batch"].as_array().unwrap().len(), 5);
}
