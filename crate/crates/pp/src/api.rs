//! HTTP API over a [`RunStore`].

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use pprune_core::gates::{GateId, ReviewSubmission};
use pprune_core::service::{AdvanceOptions, ErrorKind, RunStore, ServiceError};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub struct ApiError(StatusCode, String);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match e.kind() {
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Invalid => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T, F>(store: &Arc<RunStore>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&RunStore) -> Result<T, ServiceError> + Send + 'static,
{
    let store = store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
        .map_err(ApiError::from)
}

#[derive(Debug, Deserialize)]
pub struct CreateRun {
    /// Server-side path to `run.toml`.
    pub config: PathBuf,
    #[serde(default)]
    pub auto_approve: bool,
}

#[derive(Debug, Deserialize)]
pub struct ProfileQuery {
    pub profile: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct SelectionBody {
    pub patterns: Vec<String>,
    #[serde(default)]
    pub profile: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct WithRun<T> {
    #[serde(flatten)]
    pub body: T,
    pub run: pprune_core::service::Run,
}

fn gate_id(s: &str) -> Result<GateId, ApiError> {
    s.parse().map_err(|e: pprune_core::gates::GateError| ApiError(StatusCode::NOT_FOUND, e.to_string()))
}

async fn list_runs(State(s): State<Arc<RunStore>>) -> impl IntoResponse {
    blocking(&s, |st| st.list_runs()).await
}

async fn create_run(State(s): State<Arc<RunStore>>, Json(body): Json<CreateRun>) -> Result<Response, ApiError> {
    let Json(run) = blocking(&s, move |st| {
        let run = st.create_run(&body.config)?;
        st.advance(&run.run_id, AdvanceOptions { auto_approve: body.auto_approve, stop_after: None })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(run)).into_response())
}

async fn get_run(State(s): State<Arc<RunStore>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(&s, move |st| st.load_run(&id)).await
}

async fn categories(
    State(s): State<Arc<RunStore>>,
    Path(id): Path<String>,
    Query(q): Query<ProfileQuery>,
) -> impl IntoResponse {
    blocking(&s, move |st| st.categories(&id, q.profile.as_deref())).await
}

async fn select(
    State(s): State<Arc<RunStore>>,
    Path(id): Path<String>,
    Json(body): Json<SelectionBody>,
) -> impl IntoResponse {
    blocking(&s, move |st| {
        let (selection, run) = st.select(&id, &body.patterns, body.profile.as_deref())?;
        Ok(WithRun { body: serde_json::json!({ "selection": selection }), run })
    })
    .await
}

async fn ranking(
    State(s): State<Arc<RunStore>>,
    Path(id): Path<String>,
    Query(q): Query<ProfileQuery>,
) -> impl IntoResponse {
    blocking(&s, move |st| st.ranking(&id, q.profile.as_deref())).await
}

async fn matches(State(s): State<Arc<RunStore>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(&s, move |st| st.matches(&id)).await
}

async fn reports(State(s): State<Arc<RunStore>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(&s, move |st| st.reports(&id)).await
}

async fn pruned(State(s): State<Arc<RunStore>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(&s, move |st| st.pruned(&id)).await
}

async fn get_gate(
    State(s): State<Arc<RunStore>>,
    Path((id, gate)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let g = gate_id(&gate)?;
    Ok(blocking(&s, move |st| st.gate_log(&id, g)).await?.into_response())
}

async fn post_gate(
    State(s): State<Arc<RunStore>>,
    Path((id, gate)): Path<(String, String)>,
    Json(sub): Json<ReviewSubmission>,
) -> Result<Response, ApiError> {
    let g = gate_id(&gate)?;
    if sub.gate_id != g {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("submission is for {} but posted to {g}", sub.gate_id),
        ));
    }
    let res = blocking(&s, move |st| {
        let (gate, run) = st.review(&id, &sub)?;
        Ok(WithRun { body: serde_json::json!({ "gate": gate }), run })
    })
    .await?;
    Ok(res.into_response())
}

/// API routes, plus a static bundle at `/` when `static_dir` is given.
pub fn router(store: Arc<RunStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/runs", get(list_runs).post(create_run))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/runs/{id}/categories", get(categories))
        .route("/api/runs/{id}/selection", axum::routing::post(select))
        .route("/api/runs/{id}/ranking", get(ranking))
        .route("/api/runs/{id}/matches", get(matches))
        .route("/api/runs/{id}/reports", get(reports))
        .route("/api/runs/{id}/pruned", get(pruned))
        .route("/api/runs/{id}/gates/{gate}", get(get_gate).post(post_gate))
        .with_state(store);
    match static_dir {
        Some(d) => api.fallback_service(ServeDir::new(d)),
        None => api,
    }
}

pub async fn serve(store: Arc<RunStore>, port: u16, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(store, static_dir)).await
}
