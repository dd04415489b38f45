//! Routes and handlers. Each handler parses the request, calls one engine
//! operation and maps the result onto a status code.

use std::sync::Arc;

use axum::extract::{FromRef, FromRequestParts, Path, Query, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use corpusforge_core::exam::{ExamForm, ExamPools, ExamResult, Label};
use corpusforge_core::ingest::RawLine;
use corpusforge_core::ledger::{CostFilter, CostKind, PriceSheet, Totals};
use corpusforge_core::qc::Verdict;
use corpusforge_core::store::{ExportFormat, FunnelStats};
use corpusforge_core::tasks::TaskKind;
use corpusforge_core::types::{AssignmentId, Direction, Lang, TaskId, Timestamp, WorkerId};
use corpusforge_core::{Engine, Error};

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    /// `None` leaves requester endpoints open.
    pub requester_token: Option<Arc<str>>,
}

impl FromRef<AppState> for Arc<Engine> {
    fn from_ref(s: &AppState) -> Self {
        s.engine.clone()
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

/// A core error on its way to becoming a response.
#[derive(Debug)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub fn status_of(e: &Error) -> (StatusCode, &'static str) {
    match e {
        Error::Input(_) | Error::Range(_) => (StatusCode::BAD_REQUEST, "invalid_input"),
        Error::Auth(_) => (StatusCode::UNAUTHORIZED, "unauthenticated"),
        Error::Permission(_) => (StatusCode::FORBIDDEN, "forbidden"),
        Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
        Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
        Error::Config(_) | Error::Training(_) | Error::Integrity(_) | Error::Io(_) => {
            (StatusCode::INTERNAL_SERVER_ERROR, "internal")
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = status_of(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        (status, Json(ErrorBody { error: kind, message: self.0.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError(Error::Input(msg.into()))
}

fn bearer(parts: &Parts) -> Option<&str> {
    parts
        .headers
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
}

/// The authenticated worker behind a bearer session token.
pub struct AuthWorker(pub WorkerId);

impl FromRequestParts<AppState> for AuthWorker {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = bearer(parts).ok_or_else(|| ApiError(Error::Auth("missing bearer token".into())))?;
        Ok(AuthWorker(state.engine.authenticate(token)?))
    }
}

/// Passes when requester endpoints are open or the requester token matches.
pub struct Requester;

impl FromRequestParts<AppState> for Requester {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        match &state.requester_token {
            None => Ok(Requester),
            Some(expected) => match bearer(parts) {
                Some(t) if t == &**expected => Ok(Requester),
                Some(_) => Err(ApiError(Error::Permission("requester token required".into()))),
                None => Err(ApiError(Error::Auth("missing requester token".into()))),
            },
        }
    }
}

/// JSON body extractor that reports malformed bodies as 400 with the usual
/// error shape.
pub struct Body<T>(pub T);

impl<S, T> axum::extract::FromRequest<S> for Body<T>
where
    T: serde::de::DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(bad(e.body_text())),
        }
    }
}

fn parse_direction(s: &str) -> ApiResult<Direction> {
    s.parse::<Direction>().map_err(ApiError)
}

// ---- bodies --------------------------------------------------------------------

#[derive(Debug, Deserialize)]
pub struct RegisterBody {
    pub name: String,
    pub langs: Vec<Lang>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegisterResponse {
    pub worker_id: WorkerId,
    pub token: String,
    pub expires_at: Timestamp,
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub kind: String,
}

#[derive(Debug, Deserialize)]
pub struct TranslationBody {
    pub text: String,
    pub elapsed_ms: u64,
}

#[derive(Debug, Deserialize)]
pub struct VerdictBody {
    pub verdict: Verdict,
    pub elapsed_ms: u64,
}

#[derive(Debug, Deserialize)]
pub struct AnswersBody {
    pub version: Option<String>,
    pub answers: Vec<Label>,
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    pub direction: String,
    pub format: Option<String>,
    #[serde(default)]
    pub include_pending: bool,
}

#[derive(Debug, Deserialize)]
pub struct CostQuery {
    pub worker: Option<WorkerId>,
    pub kind: Option<CostKind>,
    pub from: Option<i64>,
    pub until: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CostResponse {
    pub prices: PriceSheet,
    pub totals: Totals,
    pub settled_verdict_sets: u64,
}

#[derive(Debug, Deserialize)]
pub struct SourcesBody {
    pub lang: Lang,
    #[serde(default)]
    pub origin: Option<String>,
    pub lines: Vec<String>,
    /// Create translation tasks in this direction for the accepted lines.
    #[serde(default)]
    pub direction: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum PublishBody {
    Form { form: ExamForm },
    Pools { pools: ExamPools, seed: u64 },
}

#[derive(Debug, Deserialize)]
pub struct CreateTasksBody {
    pub direction: String,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateTasksResponse {
    pub task_ids: Vec<TaskId>,
}

// ---- handlers ------------------------------------------------------------------

async fn register(State(engine): State<Arc<Engine>>, Body(body): Body<RegisterBody>) -> ApiResult<impl IntoResponse> {
    let session = engine.register_worker(&body.name, &body.langs)?;
    let out = RegisterResponse { worker_id: session.worker_id, token: session.token, expires_at: session.expires_at };
    Ok((StatusCode::CREATED, Json(out)))
}

async fn next_task(
    State(engine): State<Arc<Engine>>,
    AuthWorker(worker): AuthWorker,
    Query(q): Query<NextQuery>,
) -> ApiResult<Response> {
    let kind: TaskKind = q.kind.parse()?;
    Ok(match engine.assign_next(worker, kind)? {
        Some(handle) => Json(handle).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn submit_translation(
    State(engine): State<Arc<Engine>>,
    AuthWorker(worker): AuthWorker,
    Path(task_id): Path<u64>,
    Body(body): Body<TranslationBody>,
) -> ApiResult<Response> {
    let outcome = engine.submit_translation(TaskId(task_id), worker, &body.text, body.elapsed_ms)?;
    Ok(Json(outcome).into_response())
}

async fn submit_verdict(
    State(engine): State<Arc<Engine>>,
    AuthWorker(worker): AuthWorker,
    Path(assignment_id): Path<u64>,
    Body(body): Body<VerdictBody>,
) -> ApiResult<Response> {
    let outcome = engine.submit_verdict(AssignmentId(assignment_id), worker, body.verdict, body.elapsed_ms)?;
    Ok(Json(outcome).into_response())
}

async fn exam_view(State(engine): State<Arc<Engine>>, Path(direction): Path<String>) -> ApiResult<Response> {
    Ok(Json(engine.exam_view(&parse_direction(&direction)?)?).into_response())
}

async fn exam_answers(
    State(engine): State<Arc<Engine>>,
    AuthWorker(worker): AuthWorker,
    Path(direction): Path<String>,
    Body(body): Body<AnswersBody>,
) -> ApiResult<Json<ExamResult>> {
    let d = parse_direction(&direction)?;
    Ok(Json(engine.take_exam(worker, &d, body.version.as_deref(), &body.answers)?))
}

async fn publish_exam(
    State(engine): State<Arc<Engine>>,
    _: Requester,
    Path(direction): Path<String>,
    Body(body): Body<PublishBody>,
) -> ApiResult<Json<ExamForm>> {
    let d = parse_direction(&direction)?;
    let form = match body {
        PublishBody::Form { form } => {
            if form.direction != d {
                return Err(bad(format!("form is for {}, not {d}", form.direction)));
            }
            engine.publish_form(form)?
        }
        PublishBody::Pools { pools, seed } => engine.publish_exam(&d, &pools, seed)?,
    };
    Ok(Json(form))
}

async fn funnel(State(engine): State<Arc<Engine>>) -> Json<FunnelStats> {
    Json(engine.funnel_stats())
}

async fn export(State(engine): State<Arc<Engine>>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let d = parse_direction(&q.direction)?;
    let format: ExportFormat = q.format.as_deref().unwrap_or("jsonl").parse()?;
    let body = engine.export_corpus(&d, format, q.include_pending)?;
    let content_type = match format {
        ExportFormat::Jsonl => "application/x-ndjson; charset=utf-8",
        ExportFormat::Tsv => "text/tab-separated-values; charset=utf-8",
    };
    Ok(([(CONTENT_TYPE, HeaderValue::from_static(content_type))], body).into_response())
}

async fn cost(State(engine): State<Arc<Engine>>, Query(q): Query<CostQuery>) -> Json<CostResponse> {
    let filter = CostFilter { worker: q.worker, kind: q.kind, from: q.from.map(Timestamp), until: q.until.map(Timestamp) };
    let (prices, settled) = engine.read(|s| (*s.ledger().prices(), s.ledger().settled_sets()));
    Json(CostResponse { prices, totals: engine.cost_totals(&filter), settled_verdict_sets: settled })
}

async fn cost_entries(State(engine): State<Arc<Engine>>, _: Requester) -> ApiResult<Response> {
    let csv = engine.read(|s| s.ledger().to_csv())?;
    Ok(([(CONTENT_TYPE, HeaderValue::from_static("text/csv; charset=utf-8"))], csv).into_response())
}

async fn add_sources(
    State(engine): State<Arc<Engine>>,
    _: Requester,
    Body(body): Body<SourcesBody>,
) -> ApiResult<impl IntoResponse> {
    let direction = body.direction.as_deref().map(parse_direction).transpose()?;
    let origin = body.origin.unwrap_or_else(|| "upload".into());
    let lines = body.lines.into_iter().map(|l| RawLine::new(l, origin.clone())).collect();
    let outcome = engine.ingest(&body.lang, lines, direction.as_ref())?;
    Ok((StatusCode::CREATED, Json(outcome)))
}

async fn create_tasks(
    State(engine): State<Arc<Engine>>,
    _: Requester,
    Body(body): Body<CreateTasksBody>,
) -> ApiResult<impl IntoResponse> {
    let d = parse_direction(&body.direction)?;
    let task_ids = engine.create_tasks_from_pool(&d, body.limit)?;
    Ok((StatusCode::CREATED, Json(CreateTasksResponse { task_ids })))
}

async fn clear_flag(State(engine): State<Arc<Engine>>, _: Requester, Path(worker): Path<u64>) -> ApiResult<StatusCode> {
    engine.clear_flag(WorkerId(worker))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn not_found() -> ApiError {
    ApiError(Error::NotFound("no such endpoint".into()))
}

/// One declared endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Route {
    pub method: &'static str,
    pub path: &'static str,
    pub who: &'static str,
    pub summary: &'static str,
}

const ROUTES: &[Route] = &[
    Route { method: "POST", path: "/v1/workers", who: "anyone", summary: "register a worker, returns a session token" },
    Route { method: "GET", path: "/v1/tasks/next", who: "worker", summary: "next task, ?kind=translate|verify; 204 when none" },
    Route { method: "POST", path: "/v1/tasks/{id}/translation", who: "worker", summary: "submit a translation" },
    Route { method: "POST", path: "/v1/assignments/{id}/verdict", who: "worker", summary: "submit a good/bad verdict" },
    Route { method: "GET", path: "/v1/exam/{direction}", who: "anyone", summary: "the active exam, without labels" },
    Route { method: "POST", path: "/v1/exam/{direction}/answers", who: "worker", summary: "grade one exam attempt" },
    Route { method: "GET", path: "/v1/stats/funnel", who: "anyone", summary: "translated / fully verified / in corpus per direction" },
    Route { method: "GET", path: "/v1/export", who: "anyone", summary: "accepted corpus, ?direction=&format=jsonl|tsv&include_pending=" },
    Route { method: "GET", path: "/v1/cost", who: "anyone", summary: "ledger totals, ?worker=&kind=&from=&until=" },
    Route { method: "POST", path: "/v1/sources", who: "requester", summary: "upload a batch of source sentences" },
    Route { method: "POST", path: "/v1/tasks", who: "requester", summary: "create translation tasks from the pool" },
    Route { method: "PUT", path: "/v1/exam/{direction}", who: "requester", summary: "publish an exam form or build one from pools" },
    Route { method: "POST", path: "/v1/workers/{id}/clear-flag", who: "requester", summary: "lift a fast-response flag" },
    Route { method: "GET", path: "/v1/cost/entries", who: "requester", summary: "ledger entries as CSV" },
];

pub fn http_route_table() -> &'static [Route] {
    ROUTES
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/workers", post(register))
        .route("/v1/tasks/next", get(next_task))
        .route("/v1/tasks/{id}/translation", post(submit_translation))
        .route("/v1/assignments/{id}/verdict", post(submit_verdict))
        .route("/v1/exam/{direction}", get(exam_view).put(publish_exam))
        .route("/v1/exam/{direction}/answers", post(exam_answers))
        .route("/v1/stats/funnel", get(funnel))
        .route("/v1/export", get(export))
        .route("/v1/cost", get(cost))
        .route("/v1/sources", post(add_sources))
        .route("/v1/tasks", post(create_tasks))
        .route("/v1/workers/{id}/clear-flag", post(clear_flag))
        .route("/v1/cost/entries", get(cost_entries))
        .fallback(not_found)
        .with_state(state)
}
