//! HTTP API under `/api`. Bodies are JSON in SI units (meters, radians,
//! quaternions as `[x, y, z, w]`); clouds travel as PLY.
//!
//! Each session sits behind its own lock and every handler that touches
//! one runs on the blocking pool, so a slow PLY parse or outlier pass on one
//! session never stalls requests for another.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use cellreach::armkin::catalog::Catalog;
use cellreach::cloudkit::{ply, Cone, OrientedBox, ToolOp, ToolSummary};
use cellreach::feastool::{analyze, AnalysisParams, Session};
use cellreach::geom::Pose;
use cellreach::zonekit::{make_zone, spray_select, InteractionZone, DEFAULT_CONE_TOL};
use nalgebra::{Point3, Vector3};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

use crate::config::Config;
use crate::error::{Category, GatewayError, Result};
use crate::jobs::{now_ms, Job, JobState};
use crate::scenario::report_json;
use crate::store::{Loaded, Persisted, Store};

/// Upper bound on preview size, whatever the client asks for.
pub const PREVIEW_CAP: usize = 200_000;
/// Seconds suggested to clients after a storage failure.
pub const RETRY_AFTER_S: u32 = 5;
const MAX_BODY: usize = 1 << 30;

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let status = match self.category {
            Category::Parse => StatusCode::BAD_REQUEST,
            Category::Validation | Category::Planning => StatusCode::UNPROCESSABLE_ENTITY,
            Category::NotFound => StatusCode::NOT_FOUND,
            Category::Conflict => StatusCode::CONFLICT,
            Category::Storage => StatusCode::SERVICE_UNAVAILABLE,
            Category::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut resp = (status, [(header::CONTENT_TYPE, "application/json")], self.to_json()).into_response();
        if self.category == Category::Storage {
            resp.headers_mut()
                .insert(header::RETRY_AFTER, HeaderValue::from(RETRY_AFTER_S));
        }
        resp
    }
}

struct Live {
    p: Persisted,
    job: Option<Arc<Job>>,
}

enum SlotInner {
    Live(Box<Live>),
    Unrecoverable(String),
}

struct Slot {
    inner: Mutex<SlotInner>,
}

/// Shared service state behind the router.
pub struct AppState {
    store: Store,
    catalog: Catalog,
    defaults: AnalysisParams,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
    jobs: RwLock<HashMap<String, Arc<Job>>>,
    pool: Arc<Semaphore>,
}

impl AppState {
    /// Opens the store and loads every session in it.
    pub fn new(store: Store, catalog: Catalog, defaults: AnalysisParams, max_jobs: usize) -> Result<Arc<Self>> {
        let mut sessions = BTreeMap::new();
        for entry in store.load_all()? {
            let (id, inner) = match entry {
                Loaded::Ok(p) => (p.id().to_string(), SlotInner::Live(Box::new(Live { p, job: None }))),
                Loaded::Unrecoverable { id, reason } => {
                    tracing::warn!(session = %id, %reason, "session unrecoverable");
                    (id, SlotInner::Unrecoverable(reason))
                }
            };
            sessions.insert(id, Arc::new(Slot { inner: Mutex::new(inner) }));
        }
        Ok(Arc::new(Self {
            store,
            catalog,
            defaults,
            sessions: RwLock::new(sessions),
            jobs: RwLock::new(HashMap::new()),
            pool: Arc::new(Semaphore::new(max_jobs)),
        }))
    }

    pub fn from_config(cfg: &Config) -> Result<Arc<Self>> {
        cfg.validate()?;
        Self::new(Store::open(&cfg.data_dir)?, cfg.catalog()?, cfg.defaults, cfg.max_jobs)
    }

    /// The analyze worker pool. Holding permits keeps jobs queued, which
    /// is how tests pin a job in `queued`.
    pub fn worker_pool(&self) -> Arc<Semaphore> {
        self.pool.clone()
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::not_found("session", id))
    }

    fn job(&self, id: &str) -> Result<Arc<Job>> {
        self.jobs
            .read()
            .expect("jobs lock")
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::not_found("job", id))
    }

    fn with_live<R>(&self, id: &str, f: impl FnOnce(&mut Live) -> Result<R>) -> Result<R> {
        let slot = self.slot(id)?;
        let mut inner = slot.inner.lock().expect("session lock");
        match &mut *inner {
            SlotInner::Live(live) => f(live),
            SlotInner::Unrecoverable(reason) => Err(GatewayError::conflict(
                "SessionUnrecoverable",
                format!("session `{id}` could not be loaded: {reason}"),
            )),
        }
    }

    /// Runs one edit and persists it; memory and disk are rolled back
    /// together if either step fails.
    fn mutate<R>(&self, id: &str, f: impl FnOnce(&mut Session) -> cellreach::Result<R>) -> Result<(R, Value)> {
        self.with_live(id, |live| {
            let before = live.p.session.clone();
            let r = match f(&mut live.p.session) {
                Ok(r) => r,
                Err(e) => {
                    live.p.session = before;
                    return Err(e.into());
                }
            };
            if let Err(e) = self.store.sync(&mut live.p) {
                live.p.session = before;
                let _ = self.store.sync(&mut live.p);
                return Err(e);
            }
            Ok((r, session_view(live)))
        })
    }
}

fn session_view(live: &Live) -> Value {
    let s = &live.p.session;
    let state = s.state();
    let robot = state.robot.as_ref().map(|r| {
        json!({
            "name": r.model.name,
            "dof": r.model.dof(),
            "base_pose": r.base_pose,
        })
    });
    let job = live.job.as_ref().map(|j| {
        let r = j.record();
        json!({ "id": r.id, "state": r.state })
    });
    json!({
        "id": live.p.meta.id,
        "status": "ok",
        "created_ms": live.p.meta.created_ms,
        "snapshots": s.snapshot_count(),
        "workspace": state.workspace,
        "cloud": {
            "points": state.cloud.len(),
            "colored": state.cloud.colors.is_some(),
            "bounds": state.cloud.bounds().map(|(lo, hi)| [lo, hi]),
        },
        "robot": robot,
        "zones": state.zones,
        "params": s.params,
        "last_job": job,
    })
}

fn slot_view(id: &str, slot: &Slot) -> Value {
    match &*slot.inner.lock().expect("session lock") {
        SlotInner::Live(live) => session_view(live),
        SlotInner::Unrecoverable(reason) => json!({ "id": id, "status": "unrecoverable", "reason": reason }),
    }
}

fn body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| GatewayError::parse("request_body", e))
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> Result<R> + Send + 'static) -> Result<R> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| GatewayError::internal(format!("worker failed: {e}")))?
}

type AppResult<T = Json<Value>> = Result<T>;
type St = State<Arc<AppState>>;

/// Workspace used when a session is created without one: 3 m cube around
/// the origin.
pub fn default_workspace() -> OrientedBox {
    OrientedBox {
        pose: Pose::identity(),
        half_extents: Vector3::new(1.5, 1.5, 1.5),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    workspace: Option<OrientedBox>,
    params: Option<AnalysisParams>,
}

async fn create_session(State(app): St, bytes: Bytes) -> AppResult<(StatusCode, Json<Value>)> {
    let req: CreateSession = if bytes.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        body(&bytes)?
    };
    let view = blocking(move || {
        let params = req.params.unwrap_or(app.defaults);
        params.validate()?;
        let mut session = Session::new(req.workspace.unwrap_or_else(default_workspace), Default::default())?;
        session.params = params;
        let id = uuid::Uuid::new_v4().to_string();
        let p = app.store.create(&id, now_ms(), session)?;
        let live = Live { p, job: None };
        let view = session_view(&live);
        let slot = Arc::new(Slot {
            inner: Mutex::new(SlotInner::Live(Box::new(live))),
        });
        app.sessions.write().expect("sessions lock").insert(id, slot);
        Ok(view)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list_sessions(State(app): St) -> AppResult {
    let slots: Vec<(String, Arc<Slot>)> = app
        .sessions
        .read()
        .expect("sessions lock")
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let list: Vec<Value> = slots
        .iter()
        .map(|(id, slot)| {
            let mut v = slot_view(id, slot);
            // The listing stays light: zones travel with the full view only.
            if let Some(o) = v.as_object_mut() {
                if let Some(Value::Array(z)) = o.remove("zones") {
                    o.insert("zone_count".into(), json!(z.len()));
                }
            }
            v
        })
        .collect();
    Ok(Json(json!({ "sessions": list })))
}

async fn get_session(State(app): St, Path(id): Path<String>) -> AppResult {
    let slot = app.slot(&id)?;
    Ok(Json(slot_view(&id, &slot)))
}

async fn delete_session(State(app): St, Path(id): Path<String>) -> AppResult<StatusCode> {
    blocking(move || {
        let slot = app
            .sessions
            .write()
            .expect("sessions lock")
            .remove(&id)
            .ok_or_else(|| GatewayError::not_found("session", &id))?;
        if let SlotInner::Live(live) = &*slot.inner.lock().expect("session lock") {
            if let Some(j) = &live.job {
                j.request_cancel();
            }
        }
        app.store.delete(&id)
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn put_cloud(State(app): St, Path(id): Path<String>, bytes: Bytes) -> AppResult {
    blocking(move || {
        let cloud = ply::read(&bytes)?;
        let ((), view) = app.mutate(&id, |s| s.set_cloud(cloud))?;
        Ok(Json(view))
    })
    .await
}

async fn put_workspace(State(app): St, Path(id): Path<String>, bytes: Bytes) -> AppResult {
    let ws: OrientedBox = body(&bytes)?;
    blocking(move || {
        let ((), view) = app.mutate(&id, |s| s.set_workspace(ws))?;
        Ok(Json(view))
    })
    .await
}

async fn post_tool(State(app): St, Path(id): Path<String>, bytes: Bytes) -> AppResult {
    let op: ToolOp = body(&bytes)?;
    blocking(move || {
        let (summary, view): (ToolSummary, Value) = app.mutate(&id, |s| s.apply_tool(&op))?;
        Ok(Json(json!({ "op": op.name(), "summary": summary, "session": view })))
    })
    .await
}

async fn post_undo(State(app): St, Path(id): Path<String>) -> AppResult {
    blocking(move || {
        let ((), view) = app.mutate(&id, |s| s.undo().map(|_| ()))?;
        Ok(Json(view))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaceRobot {
    robot: String,
    #[serde(default)]
    base_pose: Pose,
}

async fn put_robot(State(app): St, Path(id): Path<String>, bytes: Bytes) -> AppResult {
    let req: PlaceRobot = body(&bytes)?;
    let model = app.catalog.require(&req.robot)?.clone();
    blocking(move || {
        let ((), view) = app.mutate(&id, |s| s.place_robot(model, req.base_pose))?;
        Ok(Json(view))
    })
    .await
}

async fn get_params(State(app): St, Path(id): Path<String>) -> AppResult<Json<AnalysisParams>> {
    app.with_live(&id, |live| Ok(Json(live.p.session.params)))
}

/// Parameters are configuration, not scene state: they are persisted but
/// do not add a snapshot and are not affected by undo.
async fn put_params(State(app): St, Path(id): Path<String>, bytes: Bytes) -> AppResult<Json<AnalysisParams>> {
    let params: AnalysisParams = body(&bytes)?;
    params.validate()?;
    blocking(move || {
        app.with_live(&id, |live| {
            let old = live.p.session.params;
            live.p.session.params = params;
            if let Err(e) = app.store.sync(&mut live.p) {
                live.p.session.params = old;
                return Err(e);
            }
            Ok(Json(params))
        })
    })
    .await
}

fn default_cone_tol() -> f64 {
    DEFAULT_CONE_TOL
}

/// Zone creation: a spray cone over the current cloud, or explicit points.
#[derive(Debug, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum ZoneRequest {
    Spray {
        id: String,
        cone: Cone,
        /// Device position the approach direction points away from.
        device_position: Point3<f64>,
        #[serde(default = "default_cone_tol")]
        cone_tol: f64,
        #[serde(default)]
        standoff: f64,
        #[serde(default)]
        label: String,
    },
    Explicit(InteractionZone),
}

async fn post_zone(State(app): St, Path(id): Path<String>, bytes: Bytes) -> AppResult<(StatusCode, Json<Value>)> {
    let req: ZoneRequest = body(&bytes)?;
    blocking(move || {
        let (zone, view) = app.mutate(&id, |s| {
            let zone = match req {
                ZoneRequest::Spray {
                    id,
                    cone,
                    device_position,
                    cone_tol,
                    standoff,
                    label,
                } => {
                    cone.validate()?;
                    let cloud = s.state().cloud.clone();
                    let sel = spray_select(&cloud, &cone);
                    let device = Pose::new(device_position, Default::default());
                    make_zone(id, &cloud, &sel, &device, cone_tol, standoff)?.with_label(label)
                }
                ZoneRequest::Explicit(z) => z,
            };
            s.add_zone(zone.clone())?;
            Ok(zone)
        })?;
        Ok((StatusCode::CREATED, Json(json!({ "zone": zone, "session": view }))))
    })
    .await
}

async fn delete_zone(State(app): St, Path((id, zid)): Path<(String, String)>) -> AppResult {
    blocking(move || {
        let known = app.with_live(&id, |live| Ok(live.p.session.state().zones.iter().any(|z| z.id == zid)))?;
        if !known {
            return Err(GatewayError::not_found("zone", &zid));
        }
        let (_, view) = app.mutate(&id, |s| s.remove_zone(&zid))?;
        Ok(Json(view))
    })
    .await
}

async fn post_analyze(State(app): St, Path(id): Path<String>) -> AppResult<(StatusCode, Json<Value>)> {
    let (job, snapshot) = app.with_live(&id, |live| {
        if let Some(j) = &live.job {
            if !j.state().is_terminal() {
                return Err(GatewayError::conflict(
                    "AnalyzeRunning",
                    format!("job {} is still {:?} on this session", j.record().id, j.state()),
                ));
            }
        }
        let s = &live.p.session;
        s.params.validate()?;
        let state = s.state();
        if state.zones.is_empty() {
            return Err(cellreach::Error::NoZones.into());
        }
        if state.robot.is_none() {
            return Err(cellreach::Error::RobotNotPlaced.into());
        }
        let snapshot = Session::from_history(s.params, vec![state.clone()])?;
        let job = Arc::new(Job::new(uuid::Uuid::new_v4().to_string(), id.clone()));
        live.job = Some(job.clone());
        Ok((job, snapshot))
    })?;
    let record = job.record();
    app.jobs
        .write()
        .expect("jobs lock")
        .insert(record.id.clone(), job.clone());
    tokio::spawn(run_job(app.pool.clone(), job, snapshot));
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": record.id, "state": record.state })),
    ))
}

async fn run_job(pool: Arc<Semaphore>, job: Arc<Job>, session: Session) {
    let Ok(_permit) = pool.acquire_owned().await else {
        job.fail(GatewayError::internal("worker pool closed"));
        return;
    };
    if !job.start() {
        return;
    }
    let worker = job.clone();
    let out = tokio::task::spawn_blocking(move || analyze(&session, Some(worker.cancel_flag()))).await;
    match out {
        Ok(Ok(report)) => job.finish(report_json(&report)),
        Ok(Err(cellreach::Error::Cancelled)) => job.mark_cancelled(),
        Ok(Err(e)) => job.fail(e.into()),
        Err(e) => job.fail(GatewayError::internal(format!("analysis panicked: {e}"))),
    }
}

async fn get_job(State(app): St, Path(id): Path<String>) -> AppResult<Response> {
    let job = app.job(&id)?;
    Ok(Json(job.record()).into_response())
}

/// The report exactly as `cellreach run` would write it.
async fn get_report(State(app): St, Path(id): Path<String>) -> AppResult<Response> {
    let job = app.job(&id)?;
    match job.report() {
        Some(text) => Ok(([(header::CONTENT_TYPE, "application/json")], text.to_string()).into_response()),
        None => Err(GatewayError::conflict(
            "JobNotDone",
            format!("job `{id}` is {:?}", job.state()),
        )),
    }
}

async fn cancel_job(State(app): St, Path(id): Path<String>) -> AppResult<Response> {
    let job = app.job(&id)?;
    if job.state() != JobState::Done {
        job.request_cancel();
    }
    Ok(Json(job.record()).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewQuery {
    max_points: Option<usize>,
}

/// Every `stride`-th point, with `stride` the smallest that fits the cap.
async fn get_preview(State(app): St, Path(id): Path<String>, Query(q): Query<PreviewQuery>) -> AppResult {
    let cap = q.max_points.unwrap_or(PREVIEW_CAP).min(PREVIEW_CAP);
    if cap == 0 {
        return Err(GatewayError::validation("max_points", "max_points must be at least 1"));
    }
    blocking(move || {
        let cloud = app.with_live(&id, |live| Ok(live.p.session.state().cloud.clone()))?;
        let n = cloud.len();
        let stride = n.div_ceil(cap).max(1);
        let points: Vec<_> = cloud.points.iter().step_by(stride).collect();
        let colors: Option<Vec<_>> = cloud.colors.as_ref().map(|c| c.iter().step_by(stride).collect());
        Ok(Json(json!({
            "total_points": n,
            "stride": stride,
            "points": points,
            "colors": colors,
        })))
    })
    .await
}

async fn list_robots(State(app): St) -> AppResult {
    let robots: Vec<Value> = app
        .catalog
        .iter()
        .map(|m| json!({ "name": m.name, "dof": m.dof(), "reach_radius": m.reach_radius }))
        .collect();
    Ok(Json(json!({ "robots": robots })))
}

async fn get_robot(State(app): St, Path(name): Path<String>) -> AppResult {
    let m = app
        .catalog
        .get(&name)
        .ok_or_else(|| GatewayError::not_found("robot", &name))?;
    Ok(Json(json!({ "model": m, "home": m.home_config() })))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn api_fallback() -> GatewayError {
    GatewayError::not_found("route", "under /api")
}

/// The full router; `static_dir` is served at `/` when given.
pub fn router(app: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/cloud", put(put_cloud))
        .route("/sessions/{id}/workspace", put(put_workspace))
        .route("/sessions/{id}/tools", post(post_tool))
        .route("/sessions/{id}/undo", post(post_undo))
        .route("/sessions/{id}/robot", put(put_robot))
        .route("/sessions/{id}/params", get(get_params).put(put_params))
        .route("/sessions/{id}/zones", post(post_zone))
        .route("/sessions/{id}/zones/{zid}", axum::routing::delete(delete_zone))
        .route("/sessions/{id}/analyze", post(post_analyze))
        .route("/sessions/{id}/preview", get(get_preview))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/report", get(get_report))
        .route("/jobs/{id}/cancel", post(cancel_job))
        .route("/robots", get(list_robots))
        .route("/robots/{name}", get(get_robot))
        .fallback(api_fallback)
        .with_state(app);
    let mut root = Router::new()
        .nest("/api", api)
        .layer(DefaultBodyLimit::max(MAX_BODY));
    if let Some(dir) = static_dir {
        root = root.fallback_service(ServeDir::new(dir));
    }
    root
}
