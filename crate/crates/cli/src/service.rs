//! HTTP session service. Uploads and lookups answer directly; every solve
//! runs as a job on the worker pool and is polled through `/jobs/{id}`.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::timeout::TimeoutLayer;

use reparo_core::domain::RepairMethod;
use reparo_core::model::Status;
use reparo_core::repair::RepairSpec;
use reparo_core::robustness::{TwoStageMode, TwoStageOptions};
use reparo_core::scenario::Scenario;
use reparo_core::vns::trajectory_jsonl;
use reparo_core::SolveParams;

use crate::jobs::{JobFailure, JobQueue, JobState};
use crate::ops::{self, DomainKind, Instance, OpError};
use crate::store::{SessionStore, StoreError};

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub listen: SocketAddr,
    pub store_dir: Option<PathBuf>,
    pub workers: usize,
    pub request_timeout: Duration,
    /// Defaults for every solve; requests may override them.
    pub params: SolveParams,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<SessionStore>>,
    jobs: JobQueue,
    params: SolveParams,
    /// Instances with a plan job in flight.
    planning: Arc<Mutex<BTreeSet<String>>>,
}

impl AppState {
    pub fn new(store: SessionStore, workers: usize, params: SolveParams) -> Self {
        Self {
            store: Arc::new(Mutex::new(store)),
            jobs: JobQueue::new(workers),
            params,
            planning: Arc::default(),
        }
    }

    pub fn jobs(&self) -> &JobQueue {
        &self.jobs
    }

    pub fn store(&self) -> &Mutex<SessionStore> {
        &self.store
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message.to_string())
    }

    fn not_found(kind: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no {kind} with id `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::Conflict(_) => StatusCode::CONFLICT,
            StoreError::InvalidId(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<OpError> for ApiError {
    fn from(e: OpError) -> Self {
        let status = if e.is_input() { StatusCode::BAD_REQUEST } else { StatusCode::UNPROCESSABLE_ENTITY };
        Self::new(status, e.to_string())
    }
}

fn failure(e: OpError) -> JobFailure {
    JobFailure::new(if e.is_input() { 400 } else { 422 }, e.to_string())
}

fn store_failure(e: StoreError) -> JobFailure {
    JobFailure::new(500, e.to_string())
}

type ApiResult = Result<Response, ApiError>;

/// Bodies are parsed by hand so that any malformed input is a 400.
fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return serde_json::from_str("{}").map_err(|e| ApiError::bad_request(format!("request body: {e}")));
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

fn accepted(job: &str) -> Response {
    (StatusCode::ACCEPTED, Json(json!({ "job": job, "state": "queued" }))).into_response()
}

fn ok(value: impl serde::Serialize) -> Response {
    Json(serde_json::to_value(value).expect("plain data serializes")).into_response()
}

pub fn router(state: AppState, request_timeout: Duration) -> Router {
    Router::new()
        .route("/instances", post(upload_instance))
        .route("/instances/{id}", get(get_instance))
        .route("/instances/{id}/plan", post(start_plan))
        .route("/instances/{id}/recoverability", post(start_recoverability))
        .route("/jobs/{id}", get(get_job))
        .route("/plans/{id}", get(get_plan))
        .route("/plans/{id}/repairs", post(start_repair))
        .route("/repairs/{id}", get(get_repair))
        .route("/reports/{id}", get(get_report))
        .layer(TimeoutLayer::with_status_code(StatusCode::REQUEST_TIMEOUT, request_timeout))
        .with_state(state)
}

pub async fn serve(config: ServeConfig) -> std::io::Result<()> {
    let store = match &config.store_dir {
        Some(dir) => SessionStore::open(dir).map_err(std::io::Error::other)?,
        None => SessionStore::in_memory(),
    };
    let state = AppState::new(store, config.workers, config.params.clone());
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, config.request_timeout)).await
}

#[derive(Deserialize)]
struct UploadBody {
    instance: Value,
    #[serde(default)]
    domain: Option<DomainKind>,
    #[serde(default)]
    id: Option<String>,
}

async fn upload_instance(State(st): State<AppState>, bytes: Bytes) -> ApiResult {
    let value: Value = body(&bytes)?;
    // Either {instance, domain?, id?} or a bare instance document.
    let upload = if value.get("instance").is_some() {
        serde_json::from_value::<UploadBody>(value).map_err(ApiError::bad_request)?
    } else {
        UploadBody { instance: value, domain: None, id: None }
    };
    let instance = Instance::from_value(upload.instance, upload.domain)?;
    let domain = instance.domain();
    let id = st.store.lock().unwrap().add_instance(upload.id, instance)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "domain": domain }))).into_response())
}

async fn get_instance(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let store = st.store.lock().unwrap();
    Ok(ok(store.instance(&id).ok_or_else(|| ApiError::not_found("instance", &id))?))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PlanBody {
    #[serde(default)]
    params: Option<SolveParams>,
}

/// Removes the instance from the in-flight set when the job ends, however
/// it ends.
struct PlanningGuard {
    set: Arc<Mutex<BTreeSet<String>>>,
    id: String,
}

impl Drop for PlanningGuard {
    fn drop(&mut self) {
        self.set.lock().unwrap().remove(&self.id);
    }
}

async fn start_plan(State(st): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: PlanBody = body(&bytes)?;
    let instance = {
        let store = st.store.lock().unwrap();
        store.instance(&id).ok_or_else(|| ApiError::not_found("instance", &id))?.instance.clone()
    };
    if !st.planning.lock().unwrap().insert(id.clone()) {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("a plan job for instance `{id}` is already running")));
    }
    let guard = PlanningGuard { set: Arc::clone(&st.planning), id: id.clone() };
    let params = req.params.unwrap_or_else(|| st.params.clone());
    let store = Arc::clone(&st.store);
    let job = st.jobs.submit("plan", move || {
        let _guard = guard;
        let out = ops::plan(&instance, &params).map_err(failure)?;
        if out.plan.is_none() {
            return Err(JobFailure::new(422, format!("no plan: solve ended with status {:?}", out.status)));
        }
        let plan_id = store.lock().unwrap().add_plan(&id, out.clone()).map_err(store_failure)?;
        let mut doc = serde_json::to_value(&out).expect("plain data serializes");
        doc["plan_id"] = json!(plan_id);
        Ok((Some(plan_id), doc))
    });
    Ok(accepted(&job))
}

async fn get_job(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let job = st.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    let status = match &job.state {
        JobState::Failed { code, .. } => StatusCode::from_u16(*code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
        _ => StatusCode::OK,
    };
    Ok((status, Json(serde_json::to_value(&job).expect("plain data serializes"))).into_response())
}

async fn get_plan(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let store = st.store.lock().unwrap();
    Ok(ok(store.plan(&id).ok_or_else(|| ApiError::not_found("plan", &id))?))
}

/// `"exact"`, `"vns"`, or a full `{"method": ..., ...}` object.
fn parse_method(value: Option<Value>) -> Result<RepairMethod, ApiError> {
    let method = match value {
        None => RepairMethod::Exact,
        Some(Value::String(s)) => serde_json::from_value(json!({ "method": s })).map_err(ApiError::bad_request)?,
        Some(v) => serde_json::from_value(v).map_err(ApiError::bad_request)?,
    };
    if let RepairMethod::Vns(p) = &method {
        p.validate().map_err(ApiError::bad_request)?;
    }
    Ok(method)
}

fn parse_spec(value: Option<Value>) -> Result<RepairSpec, ApiError> {
    let spec: RepairSpec = match value {
        None => RepairSpec::default(),
        Some(v) => serde_json::from_value(v).map_err(ApiError::bad_request)?,
    };
    spec.validate().map_err(ApiError::bad_request)?;
    Ok(spec)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RepairBody {
    scenario: Scenario,
    #[serde(default)]
    spec: Option<Value>,
    #[serde(default)]
    method: Option<Value>,
    #[serde(default)]
    params: Option<SolveParams>,
}

async fn start_repair(State(st): State<AppState>, Path(plan_id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: RepairBody = body(&bytes)?;
    req.scenario.validate().map_err(ApiError::bad_request)?;
    let spec = parse_spec(req.spec)?;
    let method = parse_method(req.method)?;
    let params = req.params.unwrap_or_else(|| st.params.clone());
    let (instance, incumbent, scenario_id) = {
        let mut store = st.store.lock().unwrap();
        let plan = store.plan(&plan_id).ok_or_else(|| ApiError::not_found("plan", &plan_id))?;
        let incumbent = plan.output.plan.clone().expect("stored plans hold a plan");
        let instance = store
            .instance(&plan.instance_id)
            .ok_or_else(|| ApiError::not_found("instance", &plan.instance_id))?
            .instance
            .clone();
        let scenario_id = store.add_scenario(req.scenario.clone())?;
        (instance, incumbent, scenario_id)
    };
    let scenario = req.scenario;
    let store = Arc::clone(&st.store);
    let job = st.jobs.submit("repair", move || {
        let out = ops::repair_plan(&instance, &incumbent, &scenario, &spec, &method, &params).map_err(failure)?;
        if matches!(out.status, Status::Infeasible | Status::Unbounded) || out.plan.is_none() {
            return Err(JobFailure {
                code: 422,
                error: format!("no repair: solve ended with status {:?}", out.status),
                conflicts: out.conflicts,
            });
        }
        let id = store
            .lock()
            .unwrap()
            .add_repair(&plan_id, &scenario_id, spec, method, out.clone())
            .map_err(store_failure)?;
        let mut doc = serde_json::to_value(&out).expect("plain data serializes");
        doc["repair_id"] = json!(id);
        Ok((Some(id), doc))
    });
    Ok(accepted(&job))
}

async fn get_repair(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let store = st.store.lock().unwrap();
    let rec = store.repair(&id).ok_or_else(|| ApiError::not_found("repair", &id))?;
    let mut doc = serde_json::to_value(rec).expect("plain data serializes");
    doc["trajectory_log"] = json!(trajectory_jsonl(&rec.output.result.trajectory));
    Ok(ok(doc))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecoverabilityBody {
    scenarios: Vec<Scenario>,
    /// Evaluate a stored plan...
    #[serde(default)]
    plan_id: Option<String>,
    /// ...or an inline one...
    #[serde(default)]
    plan: Option<Value>,
    /// ...or, with neither, search for a robust plan.
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    mode: Option<TwoStageMode>,
    #[serde(default)]
    pool_size: Option<usize>,
    #[serde(default)]
    spec: Option<Value>,
    #[serde(default)]
    method: Option<Value>,
    #[serde(default)]
    params: Option<SolveParams>,
}

async fn start_recoverability(State(st): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: RecoverabilityBody = body(&bytes)?;
    for s in &req.scenarios {
        s.validate().map_err(ApiError::bad_request)?;
    }
    let spec = parse_spec(req.spec)?;
    let method = parse_method(req.method)?;
    let params = req.params.unwrap_or_else(|| st.params.clone());
    let (instance, plan) = {
        let store = st.store.lock().unwrap();
        let instance = store.instance(&id).ok_or_else(|| ApiError::not_found("instance", &id))?.instance.clone();
        let plan = match (&req.plan_id, req.plan) {
            (Some(_), Some(_)) => return Err(ApiError::bad_request("give either plan_id or plan, not both")),
            (Some(pid), None) => {
                let rec = store.plan(pid).ok_or_else(|| ApiError::not_found("plan", pid))?;
                if rec.instance_id != id {
                    return Err(ApiError::bad_request(format!("plan `{pid}` belongs to instance `{}`", rec.instance_id)));
                }
                rec.output.plan.clone()
            }
            (None, p) => p,
        };
        (instance, plan)
    };
    let store = Arc::clone(&st.store);
    let scenarios = req.scenarios;
    let plan_id = req.plan_id;
    let job = match plan {
        Some(plan) => st.jobs.submit("evaluate", move || {
            let report = ops::evaluate(&instance, &plan, &scenarios, &spec, &method, &params).map_err(failure)?;
            let doc = serde_json::to_value(&report).expect("plain data serializes");
            let rid = store
                .lock()
                .unwrap()
                .add_report(&id, plan_id.as_deref(), "evaluate", doc.clone())
                .map_err(store_failure)?;
            Ok((Some(rid), doc))
        }),
        None => {
            if req.alpha.is_none() && req.mode.is_none() {
                return Err(ApiError::bad_request("give a plan to evaluate, or alpha/mode for a robust solve"));
            }
            let mut options = TwoStageOptions::new(req.alpha.unwrap_or(1.0), req.mode.unwrap_or(TwoStageMode::Simultaneous));
            if let Some(n) = req.pool_size {
                options.pool_size = n;
            }
            options.validate().map_err(ApiError::bad_request)?;
            st.jobs.submit("robust", move || {
                let out = ops::robust(&instance, &scenarios, &spec, &options, &method, &params).map_err(failure)?;
                let doc = serde_json::to_value(&out).expect("plain data serializes");
                let rid = store.lock().unwrap().add_report(&id, None, "robust", doc.clone()).map_err(store_failure)?;
                Ok((Some(rid), doc))
            })
        }
    };
    Ok(accepted(&job))
}

async fn get_report(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let store = st.store.lock().unwrap();
    Ok(ok(store.report(&id).ok_or_else(|| ApiError::not_found("report", &id))?))
}
