#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use polylens::synth::{generate, SynthConfig, SynthCorpus};
use polylens::Rating;
use polylens_service::service::ingest_into;
use polylens_service::{router, Service};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

pub struct App {
    pub dir: TempDir,
    pub corpus: SynthCorpus,
    pub service: Arc<Service>,
    pub router: Router,
}

pub fn small_config(seed: u64) -> SynthConfig {
    SynthConfig {
        papers: 300,
        authors: 30,
        seed,
        ..SynthConfig::default()
    }
}

/// Writes the corpus as JSONL under `dir/raw` and ingests it into `dir/data`.
pub fn ingest(corpus: &SynthCorpus, dir: &Path) -> std::path::PathBuf {
    let raw = dir.join("raw");
    corpus.write_to_dir(&raw).expect("write corpus");
    let data = dir.join("data");
    ingest_into(
        &raw.join("papers.jsonl"),
        &raw.join("authors.jsonl"),
        &raw.join("venues.jsonl"),
        &data,
    )
    .expect("ingest");
    data
}

pub fn app(config: &SynthConfig) -> App {
    app_from(generate(config))
}

pub fn app_from(corpus: SynthCorpus) -> App {
    let dir = TempDir::new().expect("tempdir");
    let data = ingest(&corpus, dir.path());
    let service = Arc::new(Service::open(&data).expect("open"));
    let router = router(service.clone());
    App {
        dir,
        corpus,
        service,
        router,
    }
}

pub async fn call(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => builder
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub async fn raw_call(router: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

/// Creates a feed named `name` and rates it like the synthetic topic feed.
pub async fn topic_feed(app: &App, name: &str, topic: usize, liked: usize, disliked: usize, seed: u64) -> String {
    let (status, feed) = call(&app.router, "POST", "/api/v1/feeds", Some(json!({ "name": name }))).await;
    assert_eq!(status, StatusCode::CREATED, "{feed}");
    let id = feed["feed_id"].as_str().unwrap().to_owned();
    let template = app.corpus.topic_feed(&id, topic, liked, disliked, seed);
    for (paper, rating) in &template.ratings {
        let rating = match rating {
            Rating::Liked => "liked",
            Rating::Disliked => "disliked",
        };
        let (status, body) = call(
            &app.router,
            "POST",
            &format!("/api/v1/feeds/{id}/ratings"),
            Some(json!({ "paper_id": paper, "rating": rating })),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
    id
}

pub const GOLDEN_TRANSCRIPT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/transcript.json");

/// ingest, create feed, rate 6 papers, score a page, author overview, bench run.
pub async fn transcript() -> Value {
    let app = app(&SynthConfig::default());
    let mut steps = Vec::new();
    let report = std::fs::read(app.service.data_dir().report()).unwrap();
    steps.push(json!({
        "step": "ingest",
        "response": serde_json::from_slice::<Value>(&report).unwrap(),
    }));

    let mut record = |step: &str, method: &str, uri: &str, body: Option<Value>, (status, response): (StatusCode, Value)| {
        steps.push(json!({
            "step": step,
            "request": { "method": method, "uri": uri, "body": body },
            "status": status.as_u16(),
            "response": response,
        }));
        response_of(&steps)
    };

    let body = json!({ "name": "Topic Zero" });
    let r = call(&app.router, "POST", "/api/v1/feeds", Some(body.clone())).await;
    let feed = record("create_feed", "POST", "/api/v1/feeds", Some(body), r);
    let feed_id = feed["feed_id"].as_str().unwrap().to_owned();

    let template = app.corpus.topic_feed(&feed_id, 0, 3, 3, 11);
    let uri = format!("/api/v1/feeds/{feed_id}/ratings");
    for (paper, rating) in &template.ratings {
        let rating = if *rating == Rating::Liked { "liked" } else { "disliked" };
        let body = json!({ "paper_id": paper, "rating": rating });
        let r = call(&app.router, "POST", &uri, Some(body.clone())).await;
        record("rate", "POST", &uri, Some(body), r);
    }

    let page: Vec<String> = app.corpus.papers.iter().take(20).map(|p| p.id.clone()).collect();
    let body = json!({ "paper_ids": page, "feed_ids": [feed_id], "page_seed": 7 });
    let r = call(&app.router, "POST", "/api/v1/score/page", Some(body.clone())).await;
    let scoring = record("score_page", "POST", "/api/v1/score/page", Some(body), r);

    let author = scoring["authors"][0]["author_id"].as_str().unwrap().to_owned();
    let uri = format!("/api/v1/authors/{author}/overview?feeds={feed_id}");
    let r = call(&app.router, "GET", &uri, None).await;
    record("author_overview", "GET", &uri, None, r);

    // two more rated feeds for the benchmark
    for t in 1..3 {
        topic_feed(&app, &format!("Topic {t}"), t, 6, 24, t as u64).await;
    }
    record("extra_feeds", "GET", "/api/v1/feeds", None, call(&app.router, "GET", "/api/v1/feeds", None).await);

    let body = json!({ "seed": 0 });
    let (status, mut report) = call(&app.router, "POST", "/api/v1/bench/run", Some(body.clone())).await;
    if let Some(rows) = report.get_mut("rows").and_then(Value::as_array_mut) {
        for row in rows {
            row["wallclock_ratio"] = Value::Null;
        }
    }
    record("bench_run", "POST", "/api/v1/bench/run", Some(body), (status, report));
    Value::Array(steps)
}

fn response_of(steps: &[Value]) -> Value {
    steps.last().unwrap()["response"].clone()
}

/// Structural equality with a relative tolerance on numbers.
pub fn json_close(a: &Value, b: &Value, tol: f64) -> Result<(), String> {
    fn walk(a: &Value, b: &Value, tol: f64, path: &str) -> Result<(), String> {
        match (a, b) {
            (Value::Number(x), Value::Number(y)) => {
                let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
                if (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0) {
                    Ok(())
                } else {
                    Err(format!("{path}: {x} != {y}"))
                }
            }
            (Value::Array(x), Value::Array(y)) => {
                if x.len() != y.len() {
                    return Err(format!("{path}: length {} != {}", x.len(), y.len()));
                }
                x.iter()
                    .zip(y)
                    .enumerate()
                    .try_for_each(|(i, (x, y))| walk(x, y, tol, &format!("{path}[{i}]")))
            }
            (Value::Object(x), Value::Object(y)) => {
                let kx: Vec<_> = x.keys().collect();
                let ky: Vec<_> = y.keys().collect();
                if kx != ky {
                    return Err(format!("{path}: keys {kx:?} != {ky:?}"));
                }
                x.iter().try_for_each(|(k, v)| walk(v, &y[k], tol, &format!("{path}.{k}")))
            }
            _ if a == b => Ok(()),
            _ => Err(format!("{path}: {a} != {b}")),
        }
    }
    walk(a, b, tol, "$")
}
