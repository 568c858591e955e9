use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use pathlattice_lab::api::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

const SENTINEL_NUMBER: &str = "987654.321123";
const SENTINEL_CATEGORY: &str = "POISON_SENTINEL_7f3a";

fn csv_text() -> String {
    let mut out = String::from("x0,x1,colour,y\n");
    for i in 0..150 {
        let x0 = ((i * 37) % 150) as f64 / 75.0 - 1.0;
        let x1 = ((i * 91) % 150) as f64 / 75.0 - 1.0;
        let colour = if i == 7 { SENTINEL_CATEGORY } else { ["scarlet", "jade"][i % 2] };
        let x0 = if i == 11 { SENTINEL_NUMBER.to_string() } else { x0.to_string() };
        let y = u8::from(x0.parse::<f64>().unwrap() * 0.001 + x1 > 0.0);
        out.push_str(&format!("{x0},{x1},{colour},{y}\n"));
    }
    out
}

struct Client {
    app: axum::Router,
}

impl Client {
    fn new() -> Self {
        Client {
            app: router(Arc::new(AppState::new(Default::default(), 2))),
        }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, v)
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    /// A session with data loaded and one classifier pool.
    async fn prepared(&self) -> (String, String) {
        let (st, v) = self.post("/v1/sessions", json!({"config": {"seed": 3}})).await;
        assert_eq!(st, StatusCode::CREATED, "{v}");
        let sid = v["id"].as_str().unwrap().to_string();
        let (st, v) = self
            .post(
                &format!("/v1/sessions/{sid}/data"),
                json!({"csv": csv_text(), "split": {"fractions": [0.6, 0.2, 0.2], "stratify_by": "y", "seed": 4}}),
            )
            .await;
        assert_eq!(st, StatusCode::CREATED, "{v}");
        assert_eq!(v["manifest"]["rows"], 150);
        let (st, v) = self
            .post(
                &format!("/v1/sessions/{sid}/qgraph"),
                json!({"inputs": ["x0", "x1", "colour"], "output": "y", "task": "classifier", "max_depth": 2, "capacity": 16}),
            )
            .await;
        assert_eq!(st, StatusCode::CREATED, "{v}");
        (sid, v["pool"].as_str().unwrap().to_string())
    }
}

#[tokio::test]
async fn full_workflow() {
    let c = Client::new();
    let (sid, pid) = c.prepared().await;
    let base = format!("/v1/sessions/{sid}/qgraph/{pid}");

    let (st, v) = c.get(&format!("{base}/graphs?n=3")).await;
    assert_eq!(st, StatusCode::CONFLICT, "{v}");
    assert_eq!(v["error"]["code"], "fit_before_best");

    let (st, v) = c.post(&format!("{base}/fit"), json!({"rounds": 3, "workers": 2, "auto_update": true})).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let rounds = v["rounds"].as_array().unwrap();
    assert_eq!(rounds.len(), 3);
    assert_eq!(rounds[2]["generation"], 3);
    assert!(!rounds[0]["updated_with"].as_array().unwrap().is_empty());

    let (st, graphs) = c.get(&format!("{base}/graphs?n=5")).await;
    assert_eq!(st, StatusCode::OK);
    let graphs = graphs.as_array().unwrap().clone();
    assert_eq!(graphs.len(), 5);
    let losses: Vec<f64> = graphs.iter().map(|g| g["score"].as_f64().unwrap()).collect();
    assert!(losses.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(graphs[0]["structure_hash"], rounds[2]["best_structure_hash"]);
    let gid = graphs[0]["id"].as_u64().unwrap();

    let (st, eq) = c.get(&format!("{base}/graphs/{gid}/equation?signif=3&format=text")).await;
    assert_eq!(st, StatusCode::OK, "{eq}");
    assert!(eq["text"].as_str().unwrap().starts_with("logistic("));
    assert_eq!(eq["expression"]["op"], "logistic");
    let (_, latex) = c.get(&format!("{base}/graphs/{gid}/equation?format=latex")).await;
    assert_eq!(latex["format"], "latex");
    let (st, _) = c.get(&format!("{base}/graphs/{gid}/equation?signif=abc")).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    for kind in ["roc", "probability_scores", "segmented_loss"] {
        let (st, p) = c.get(&format!("{base}/graphs/{gid}/plot/{kind}?dataset=valid")).await;
        assert_eq!(st, StatusCode::OK, "{kind}: {p}");
        assert_eq!(p["kind"], kind);
        assert_eq!(p["version"], 1);
        assert_eq!(p["meta"]["dataset"], "valid");
        assert_eq!(p["meta"]["structure_hash"], graphs[0]["structure_hash"]);
    }
    let (st, p) = c.get(&format!("{base}/graphs/{gid}/plot/nope")).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{p}");

    let (st, member) = c.get(&format!("{base}/graphs/{gid}")).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(member["id"], gid);

    let (st, summary) = c.get(&format!("/v1/sessions/{sid}")).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(summary["pools"][&pid]["generation"], 3);
    assert_eq!(summary["holdout_unlocked"], false);

    let (_, history) = c.get(&format!("/v1/sessions/{sid}/history")).await;
    let names: Vec<&str> = history.as_array().unwrap().iter().map(|e| e["event"].as_str().unwrap()).collect();
    assert_eq!(names.iter().filter(|n| **n == "fit_round").count(), 3);
    assert_eq!(names.iter().filter(|n| **n == "update_applied").count(), 3);
    assert!(history[1].get("csv").is_none());
}

#[tokio::test]
async fn holdout_gate() {
    let c = Client::new();
    let (sid, pid) = c.prepared().await;
    let base = format!("/v1/sessions/{sid}/qgraph/{pid}");
    c.post(&format!("{base}/fit"), json!({"rounds": 1})).await;
    let (_, graphs) = c.get(&format!("{base}/graphs?n=1")).await;
    let gid = graphs[0]["id"].as_u64().unwrap();
    let holdout = format!("{base}/graphs/{gid}/plot/roc?dataset=holdout");

    let (st, v) = c.get(&holdout).await;
    assert_eq!(st, StatusCode::FORBIDDEN);
    assert_eq!(v["error"]["code"], "holdout_locked");
    assert_eq!(v["error"]["message"], "holdout locked");

    let (st, v) = c.post(&format!("/v1/sessions/{sid}/holdout/unlock"), json!({})).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["changed"], true);
    let (_, v) = c.post(&format!("/v1/sessions/{sid}/holdout/unlock"), json!({})).await;
    assert_eq!(v["changed"], false);

    let (st, v) = c.get(&holdout).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["meta"]["dataset"], "holdout");
    let (_, history) = c.get(&format!("/v1/sessions/{sid}/history")).await;
    let unlocks = history.as_array().unwrap().iter().filter(|e| e["event"] == "holdout_unlocked").count();
    assert_eq!(unlocks, 1);
}

#[tokio::test]
async fn manual_update_reinforces_only_the_chosen_graphs() {
    let c = Client::new();
    let (sid, pid) = c.prepared().await;
    let base = format!("/v1/sessions/{sid}/qgraph/{pid}");
    c.post(&format!("{base}/fit"), json!({"rounds": 1})).await;
    let (_, graphs) = c.get(&format!("{base}/graphs?n=6")).await;
    let chosen = graphs[5]["id"].as_u64().unwrap();
    let (_, before) = c.get(&format!("/v1/sessions/{sid}/lattice")).await;
    let (st, v) = c.post(&format!("/v1/sessions/{sid}/update"), json!({"pool": pid, "graphs": [chosen]})).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["structure_hashes"][0], graphs[5]["structure_hash"]);
    let (_, after) = c.get(&format!("/v1/sessions/{sid}/lattice")).await;

    let total = |snap: &Value| -> f64 {
        snap["counts"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|c| c["kinds"].as_object().unwrap().values())
            .map(|v| v.as_f64().unwrap())
            .sum()
    };
    let interactions = graphs[5]["structure"]["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|n| n["role"] == "interaction")
        .count();
    assert_eq!(total(&after) - total(&before), interactions as f64);

    let (st, v) = c.post(&format!("/v1/sessions/{sid}/update"), json!({"pool": pid, "graphs": [9_999_999]})).await;
    assert_eq!(st, StatusCode::NOT_FOUND, "{v}");
    let (_, unchanged) = c.get(&format!("/v1/sessions/{sid}/lattice")).await;
    assert_eq!(unchanged, after);
}

#[tokio::test]
async fn data_never_reaches_the_lattice() {
    let c = Client::new();
    let (sid, pid) = c.prepared().await;
    let base = format!("/v1/sessions/{sid}/qgraph/{pid}");
    c.post(&format!("{base}/fit"), json!({"rounds": 2, "auto_update": true})).await;
    let (_, graphs) = c.get(&format!("{base}/graphs?n=3")).await;
    let ids: Vec<u64> = graphs.as_array().unwrap().iter().map(|g| g["id"].as_u64().unwrap()).collect();
    c.post(&format!("/v1/sessions/{sid}/update"), json!({"pool": pid, "graphs": ids})).await;

    let (_, lattice) = c.get(&format!("/v1/sessions/{sid}/lattice")).await;
    let text = lattice.to_string();
    assert!(!text.contains(SENTINEL_CATEGORY));
    assert!(!text.contains("987654"));
    assert!(!text.contains("scarlet") && !text.contains("jade"));
    assert!(text.contains("colour"), "feature names are registered");

    let (_, file) = c.post(&format!("/v1/sessions/{sid}/save"), json!({})).await;
    let lattice_in_file = file["body"]["lattice"].to_string();
    assert!(!lattice_in_file.contains(SENTINEL_CATEGORY) && !lattice_in_file.contains("987654"));
    assert!(file["body"]["history"][1]["csv"].as_str().unwrap().contains(SENTINEL_CATEGORY));
}

#[tokio::test]
async fn save_and_resume() {
    let c = Client::new();
    let (sid, pid) = c.prepared().await;
    let base = format!("/v1/sessions/{sid}/qgraph/{pid}");
    c.post(&format!("{base}/fit"), json!({"rounds": 2, "auto_update": true})).await;
    let (_, file) = c.post(&format!("/v1/sessions/{sid}/save"), json!({})).await;

    let (st, v) = c.post("/v1/sessions/resume", file.clone()).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "already open: {v}");

    let other = Client::new();
    let (st, v) = other.post("/v1/sessions/resume", file.clone()).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    assert_eq!(v["id"], sid.as_str());
    assert_eq!(other.get(&format!("{base}/graphs?n=8")).await, c.get(&format!("{base}/graphs?n=8")).await);
    assert_eq!(
        other.get(&format!("/v1/sessions/{sid}/lattice")).await,
        c.get(&format!("/v1/sessions/{sid}/lattice")).await
    );

    let mut tampered = file.clone();
    tampered["body"]["next_pool"] = json!(7);
    let (st, v) = Client::new().post("/v1/sessions/resume", tampered).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "integrity");
}

#[tokio::test]
async fn error_payloads() {
    let c = Client::new();
    let (st, v) = c.get("/v1/sessions/nope").await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "not_found");

    let (sid, pid) = c.prepared().await;
    let (st, _) = c.get(&format!("/v1/sessions/{sid}/qgraph/p42/graphs")).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = c.get(&format!("/v1/sessions/{sid}/qgraph/{pid}/graphs/xyz/equation")).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = c.get("/v2/whatever").await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let (st, v) = c
        .post(
            &format!("/v1/sessions/{sid}/qgraph"),
            json!({
                "inputs": ["x0", "x1"],
                "output": "y",
                "task": "classifier",
                "max_depth": 1,
                "filters": [{"contains": "x0"}, {"contains": "x1"}, {"functions": ["exp"]}],
                "capacity": 4
            }),
        )
        .await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["error"]["code"], "filter_starvation");
    assert_eq!(v["error"]["acceptance_rate"], 0.0);

    let (st, v) = c
        .post(
            &format!("/v1/sessions/{sid}/qgraph"),
            json!({"inputs": ["x0"], "output": "y", "task": "classifier", "filters": [{"contains": "x1"}]}),
        )
        .await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{v}");

    let (st, v) = c.post(&format!("/v1/sessions/{sid}/qgraph"), json!({"inputs": "x0"})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{v}");
    assert_eq!(v["error"]["code"], "malformed_json");

    let (st, _) = c.post(&format!("/v1/sessions/{sid}/qgraph/{pid}/fit"), json!({"rounds": 0})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn reads_proceed_while_a_fit_runs() {
    let c = Client::new();
    let (sid, pid) = c.prepared().await;
    let base = format!("/v1/sessions/{sid}/qgraph/{pid}");
    c.post(&format!("{base}/fit"), json!({"rounds": 1})).await;
    let fit = {
        let c = Client { app: c.app.clone() };
        let base = base.clone();
        tokio::spawn(async move { c.post(&format!("{base}/fit"), json!({"rounds": 8})).await })
    };
    let mut generations = Vec::new();
    for _ in 0..20 {
        let (st, v) = c.get(&base).await;
        assert_eq!(st, StatusCode::OK);
        generations.push(v["generation"].as_u64().unwrap());
        tokio::task::yield_now().await;
    }
    let (st, _) = fit.await.unwrap();
    assert_eq!(st, StatusCode::OK);
    assert!(generations.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(c.get(&base).await.1["generation"], 9);
}
