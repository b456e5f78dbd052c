//! JSON API under `/api/v1`.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use polylens::bench::BenchReport;
use polylens::explainer::Explanation;
use polylens::lens::{PagePaper, PageScoring};
use polylens::{Feed, KPolicy, Rating};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use crate::error::{ApiError, ApiResult};
use crate::service::{
    AuthorOverview, BenchRequest, IndexBuildResponse, IndexStatus, PageScoreRequest, Service, DEFAULT_SEED,
};

type Shared = State<Arc<Service>>;

pub fn router(service: Arc<Service>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers(Any);
    let api = Router::new()
        .route("/health", get(health))
        .route("/feeds", get(list_feeds).post(create_feed))
        .route("/feeds/{id}", get(get_feed))
        .route("/feeds/{id}/ratings", post(rate))
        .route("/score/page", post(score_page))
        .route("/papers/{id}/scores", get(paper_scores))
        .route("/papers/{id}/explanation", get(paper_explanation))
        .route("/authors/{id}/overview", get(author_overview))
        .route("/index", get(index_status))
        .route("/index/build", post(build_index))
        .route("/bench/run", post(run_bench));
    Router::new()
        .nest("/api/v1", api)
        .fallback(not_found)
        .layer(cors)
        .with_state(service)
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such route")
}

fn body<T>(r: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    r.map(|Json(t)| t)
        .map_err(|e| ApiError::invalid(format!("bad request body: {}", e.body_text())))
}

fn query<T>(r: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    r.map(|Query(t)| t)
        .map_err(|e| ApiError::invalid(format!("bad query string: {}", e.body_text())))
}

fn path(r: Result<Path<String>, PathRejection>) -> ApiResult<String> {
    r.map(|Path(p)| p)
        .map_err(|e| ApiError::invalid(format!("bad path: {}", e.body_text())))
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn split_ids(s: Option<String>) -> Vec<String> {
    s.map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(str::to_owned)
            .collect()
    })
    .unwrap_or_default()
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    snapshot_version: u64,
    feeds: usize,
}

async fn health(State(s): Shared) -> Json<Health> {
    Json(Health {
        status: "ok",
        snapshot_version: s.snapshot().version(),
        feeds: s.list_feeds().len(),
    })
}

#[derive(Debug, Deserialize)]
pub struct CreateFeed {
    pub name: String,
    #[serde(default)]
    pub color: Option<String>,
}

async fn create_feed(State(s): Shared, req: Result<Json<CreateFeed>, JsonRejection>) -> ApiResult<impl IntoResponse> {
    let req = body(req)?;
    let feed = s.create_feed(&req.name, req.color.as_deref())?;
    Ok((StatusCode::CREATED, Json(feed)))
}

async fn list_feeds(State(s): Shared) -> Json<Vec<Feed>> {
    Json(s.list_feeds())
}

async fn get_feed(State(s): Shared, id: Result<Path<String>, PathRejection>) -> ApiResult<Json<Feed>> {
    Ok(Json(s.feed(&path(id)?)?))
}

#[derive(Debug, Deserialize)]
pub struct RateRequest {
    pub paper_id: String,
    /// `null` removes the rating.
    pub rating: Option<Rating>,
}

async fn rate(
    State(s): Shared,
    id: Result<Path<String>, PathRejection>,
    req: Result<Json<RateRequest>, JsonRejection>,
) -> ApiResult<Json<Feed>> {
    let id = path(id)?;
    let req = body(req)?;
    Ok(Json(s.rate(&id, &req.paper_id, req.rating)?))
}

async fn score_page(State(s): Shared, req: Result<Json<PageScoreRequest>, JsonRejection>) -> ApiResult<Json<PageScoring>> {
    let req = body(req)?;
    blocking(move || s.score_page(&req)).await.map(Json)
}

#[derive(Debug, Deserialize)]
pub struct FeedsQuery {
    pub feeds: Option<String>,
    #[serde(default)]
    pub approx: bool,
}

async fn paper_scores(
    State(s): Shared,
    id: Result<Path<String>, PathRejection>,
    q: Result<Query<FeedsQuery>, QueryRejection>,
) -> ApiResult<Json<PagePaper>> {
    let id = path(id)?;
    let feeds = split_ids(query(q)?.feeds);
    blocking(move || s.paper_scores(&id, &feeds)).await.map(Json)
}

#[derive(Debug, Deserialize)]
pub struct ExplainQuery {
    pub feed: String,
    pub k: Option<usize>,
}

async fn paper_explanation(
    State(s): Shared,
    id: Result<Path<String>, PathRejection>,
    q: Result<Query<ExplainQuery>, QueryRejection>,
) -> ApiResult<Json<Explanation>> {
    let id = path(id)?;
    let q = query(q)?;
    blocking(move || s.explain_paper(&id, &q.feed, q.k)).await.map(Json)
}

async fn author_overview(
    State(s): Shared,
    id: Result<Path<String>, PathRejection>,
    q: Result<Query<FeedsQuery>, QueryRejection>,
) -> ApiResult<Json<AuthorOverview>> {
    let id = path(id)?;
    let q = query(q)?;
    let feeds = split_ids(q.feeds);
    blocking(move || s.author_overview(&id, &feeds, q.approx)).await.map(Json)
}

async fn index_status(State(s): Shared) -> Json<IndexStatus> {
    Json(s.index_status())
}

#[derive(Debug, Default, Deserialize)]
pub struct BuildIndexRequest {
    #[serde(default)]
    pub policy: Option<KPolicy>,
    #[serde(default)]
    pub seed: Option<u64>,
}

async fn build_index(
    State(s): Shared,
    req: Result<Json<BuildIndexRequest>, JsonRejection>,
) -> ApiResult<Json<IndexBuildResponse>> {
    let req = body(req)?;
    let policy = req.policy.unwrap_or(KPolicy::Sqrt(1.0));
    let seed = req.seed.unwrap_or(DEFAULT_SEED);
    blocking(move || s.build_index(policy, seed)).await.map(Json)
}

async fn run_bench(State(s): Shared, req: Result<Json<BenchRequest>, JsonRejection>) -> ApiResult<Json<BenchReport>> {
    let req = body(req)?;
    blocking(move || s.run_bench(&req)).await.map(Json)
}
