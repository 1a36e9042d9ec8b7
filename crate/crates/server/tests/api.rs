use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;
use voselect_core::selection::{enumerate_all, CandidateSet, SearchSpace};
use voselect_core::spec::fitness_of;
use voselect_core::{Store, StoreDocument, VOSpecification, Workspace};
use voselect_server::{dispatch, router, serve, ServerError};

fn fixture(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    dispatch(app, method, uri, body).await
}

async fn loaded() -> Router {
    let app = router(Workspace::in_memory());
    let (s, _) = call(&app, Method::POST, "/v1/registry", Some(fixture("registry.json"))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = call(&app, Method::POST, "/v1/graph", Some(fixture("graph.json"))).await;
    assert_eq!(s, StatusCode::CREATED);
    app
}

#[tokio::test]
async fn unknown_run_is_a_not_found_error_object() {
    let app = router(Workspace::in_memory());
    let (s, body) = call(&app, Method::GET, "/v1/runs/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
    assert!(body["message"].as_str().unwrap().contains("nope"));
    assert!(body.get("detail").is_some());
}

#[tokio::test]
async fn malformed_bodies_are_client_errors() {
    let app = router(Workspace::in_memory());
    let req = Request::builder()
        .method(Method::POST)
        .uri("/v1/relations")
        .body(Body::from("{not json"))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

    let rel = json!({"id": "r", "type": "knows", "source": "a", "target": "b"});
    let (s, body) = call(&app, Method::POST, "/v1/relations", Some(rel)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "dangling_endpoint");

    let mut spec = fixture("spec.json");
    spec["roles"] = json!([]);
    let (s, body) = call(&app, Method::POST, "/v1/specs", Some(spec.clone())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(!body["detail"]["violations"].as_array().unwrap().is_empty());
    let (s, body) = call(&app, Method::POST, "/v1/specs/validate", Some(spec)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["valid"], false);
}

#[tokio::test]
async fn advancing_three_times_yields_the_enumerated_variants() {
    let app = loaded().await;
    let (s, body) = call(&app, Method::POST, "/v1/specs", Some(fixture("spec.json"))).await;
    assert_eq!(s, StatusCode::CREATED);
    let spec_id = body["id"].as_str().unwrap().to_string();
    let (s, run) = call(
        &app,
        Method::POST,
        "/v1/runs",
        Some(json!({"spec_id": spec_id, "config": {"oracle": true, "ga": {"seed": 7}}})),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(run["state"], "specified");
    let id = run["run_id"].as_str().unwrap().to_string();
    let mut state = Value::Null;
    for _ in 0..3 {
        let (s, run) = call(&app, Method::POST, &format!("/v1/runs/{id}/advance"), None).await;
        assert_eq!(s, StatusCode::OK);
        state = run["state"].clone();
    }
    assert_eq!(state, "performance_ranked");
    let (_, run) = call(&app, Method::GET, &format!("/v1/runs/{id}"), None).await;
    let (_, variants) = call(&app, Method::GET, &format!("/v1/runs/{id}/variants"), None).await;

    // independent enumeration over the run's own candidate sets and the current store
    let (_, doc) = call(&app, Method::GET, "/v1/export", None).await;
    let doc: StoreDocument = serde_json::from_value(doc).unwrap();
    let snap = Store::import(doc).unwrap().snapshot();
    assert_eq!(snap.id(), run["snapshot_id"]);
    let spec: VOSpecification = serde_json::from_value(fixture("spec.json")).unwrap();
    let sets: Vec<CandidateSet> = serde_json::from_value(run["candidate_sets"].clone()).unwrap();
    let f = fitness_of(&spec, &snap).unwrap();
    let oracle = enumerate_all(&f, &SearchSpace::new(&sets, spec.exclusivity), 1_000_000).unwrap();

    let got = variants.as_array().unwrap();
    assert_eq!(got.len(), oracle.variants.len());
    let mut pairs: Vec<(String, f64)> = got
        .iter()
        .map(|v| (v["assignment"].to_string(), v["fitness"].as_f64().unwrap()))
        .collect();
    let mut expect: Vec<(String, f64)> = oracle
        .variants
        .iter()
        .map(|v| (serde_json::to_string(&v.assignment).unwrap(), v.fitness))
        .collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    expect.sort_by(|a, b| a.0.cmp(&b.0));
    assert_eq!(pairs, expect);
    for (i, v) in got.iter().enumerate() {
        assert_eq!(v["rank"], i as u64 + 1);
    }

    let (s, body) = call(&app, Method::POST, &format!("/v1/runs/{id}/incept"), Some(json!({"rank": 1}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let vo = body["vo_id"].as_str().unwrap().to_string();
    let (s, el) = call(&app, Method::GET, &format!("/v1/elements/{vo}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(el["competences"].as_array().unwrap().len(), 2);
    let (s, body) = call(&app, Method::POST, &format!("/v1/runs/{id}/incept"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["code"], "already_incepted");
}

#[tokio::test]
async fn each_mutation_emits_one_event() {
    let app = router(Workspace::in_memory());
    let mut last = None;
    let steps = [
        ("/v1/elements", json!({"element": {"id": "a", "kind": "partner", "name": "A"}})),
        ("/v1/elements", json!({"element": {"id": "b", "kind": "partner", "name": "B"}})),
        ("/v1/relations", json!({"id": "r", "type": "knows", "source": "a", "target": "b"})),
        (
            "/v1/indicators",
            json!({"id": "n", "name": "links", "expression": {"op": "count", "query": {"from": "relations"}},
                   "alarm": {"cmp": "ge", "threshold": 2.0}, "subscribers": ["ops"]}),
        ),
        ("/v1/relations", json!({"id": "r2", "type": "knows", "source": "b", "target": "a"})),
    ];
    for (uri, body) in steps {
        let (s, report) = call(&app, Method::POST, uri, Some(body)).await;
        assert_eq!(s, StatusCode::CREATED, "{report}");
        let report = if report.get("report").is_some() { report["report"].clone() } else { report };
        let t = report["event"]["timestamp"].as_u64().unwrap();
        if let Some(prev) = last {
            assert_eq!(t, prev + 1);
        }
        last = Some(t);
    }
    let (_, feed) = call(&app, Method::GET, "/v1/notifications?cursor=0", None).await;
    assert_eq!(feed["items"].as_array().unwrap().len(), 1);
    let next = feed["next_cursor"].as_u64().unwrap();
    let (_, feed) = call(&app, Method::GET, &format!("/v1/notifications?cursor={next}"), None).await;
    assert!(feed["items"].as_array().unwrap().is_empty());
    let (_, v) = call(&app, Method::GET, "/v1/indicators/n", None).await;
    assert_eq!(v["value"], json!({"status": "available", "value": 2.0}));
}

#[tokio::test]
async fn list_endpoints_paginate() {
    let app = loaded().await;
    let (_, p1) = call(&app, Method::GET, "/v1/elements?limit=4", None).await;
    assert_eq!(p1["items"].as_array().unwrap().len(), 4);
    let next = p1["next_cursor"].as_u64().unwrap();
    let (_, p2) = call(&app, Method::GET, &format!("/v1/elements?cursor={next}&limit=100"), None).await;
    assert_eq!(p2["items"].as_array().unwrap().len(), 5);
    let (_, rels) = call(&app, Method::GET, "/v1/relations?type=trusts&limit=2", None).await;
    assert!(rels["items"].as_array().unwrap().iter().all(|r| r["type"] == "trusts"));
}

#[tokio::test]
async fn export_then_import_preserves_content() {
    let app = loaded().await;
    let (_, doc) = call(&app, Method::GET, "/v1/export", None).await;
    let fresh = router(Workspace::in_memory());
    call(&fresh, Method::POST, "/v1/registry", Some(doc["registry"].clone())).await;
    call(&fresh, Method::POST, "/v1/graph", Some(doc["graph"].clone())).await;
    let (_, again) = call(&fresh, Method::GET, "/v1/export", None).await;
    assert_eq!(again, doc);
    let (_, a) = call(&app, Method::POST, "/v1/snapshot", None).await;
    let (_, b) = call(&fresh, Method::POST, "/v1/snapshot", None).await;
    assert_eq!(a["id"], b["id"]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_reads_during_a_run_succeed() {
    let app = loaded().await;
    let spec = fixture("spec.json");
    let writer = {
        let app = app.clone();
        tokio::spawn(async move {
            call(
                &app,
                Method::POST,
                "/v1/runs",
                Some(json!({"spec": spec, "until": "performance_ranked"})),
            )
            .await
        })
    };
    let mut readers = Vec::new();
    for _ in 0..16 {
        let app = app.clone();
        readers.push(tokio::spawn(async move { call(&app, Method::GET, "/v1/elements", None).await }));
    }
    for r in readers {
        let (s, body) = r.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        assert_eq!(body["items"].as_array().unwrap().len(), 9);
    }
    let (s, run) = writer.await.unwrap();
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(run["state"], "performance_ranked");
}

#[tokio::test]
async fn port_in_use_fails_startup() {
    let taken = std::net::TcpListener::bind("0.0.0.0:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let err = serve(port, dir.path()).await.unwrap_err();
    assert!(matches!(err, ServerError::Bind { .. }));
}
