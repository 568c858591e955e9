//! The `/v1` HTTP API.
//!
//! Each session has one writer at a time. Fit rounds run on a blocking
//! thread against a detached copy of the session and are committed one
//! round at a time, so reads made during a fit see the last completed
//! generation.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pathlattice::data::SplitSpec;
use pathlattice::graph::SemanticType;
use pathlattice::lattice::{LatticeConfig, LatticeSnapshot};
use pathlattice::pool::Member;
use pathlattice::sympify::Format;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::persist::SessionFile;
use crate::session::{
    DatasetSummary, EquationView, GraphSummary, PlotKind, PlotRequest, PoolSummary, Question, RoundSummary, Session,
    SessionSummary, SplitName, DEFAULT_DATASET,
};

pub const MAX_ROUNDS: usize = 10_000;

impl IntoResponse for LabError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.payload())).into_response()
    }
}

struct SessionHandle {
    writer: tokio::sync::Mutex<()>,
    state: RwLock<Session>,
}

impl SessionHandle {
    fn new(session: Session) -> Self {
        SessionHandle {
            writer: tokio::sync::Mutex::new(()),
            state: RwLock::new(session),
        }
    }

    fn read(&self) -> RwLockReadGuard<'_, Session> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Session> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }
}

/// Open sessions and server-wide defaults.
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    lattice_config: LatticeConfig,
    workers: usize,
}

impl AppState {
    pub fn new(lattice_config: LatticeConfig, workers: usize) -> Self {
        AppState {
            sessions: RwLock::new(HashMap::new()),
            lattice_config,
            workers: workers.max(1),
        }
    }

    fn get(&self, id: &str) -> Result<Arc<SessionHandle>> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| LabError::not_found("session", id))
    }

    fn insert(&self, session: Session) -> Result<()> {
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        if sessions.contains_key(session.id()) {
            return Err(LabError::BadRequest(format!("session `{}` is already open", session.id())));
        }
        sessions.insert(session.id().to_string(), Arc::new(SessionHandle::new(session)));
        Ok(())
    }
}

impl Default for AppState {
    fn default() -> Self {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        AppState::new(LatticeConfig::default(), workers)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let v1 = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/resume", post(resume_session))
        .route("/sessions/{sid}", get(session_summary))
        .route("/sessions/{sid}/history", get(history))
        .route("/sessions/{sid}/lattice", get(lattice))
        .route("/sessions/{sid}/data", post(load_data))
        .route("/sessions/{sid}/qgraph", post(pose_question))
        .route("/sessions/{sid}/qgraph/{pid}", get(pool_summary))
        .route("/sessions/{sid}/qgraph/{pid}/fit", post(fit))
        .route("/sessions/{sid}/qgraph/{pid}/graphs", get(graphs))
        .route("/sessions/{sid}/qgraph/{pid}/graphs/{gid}", get(graph))
        .route("/sessions/{sid}/qgraph/{pid}/graphs/{gid}/equation", get(equation))
        .route("/sessions/{sid}/qgraph/{pid}/graphs/{gid}/plot/{kind}", get(plot))
        .route("/sessions/{sid}/update", post(update))
        .route("/sessions/{sid}/holdout/unlock", post(unlock_holdout))
        .route("/sessions/{sid}/save", post(save));
    Router::new().nest("/v1", v1).fallback(not_found).with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn not_found() -> LabError {
    LabError::not_found("route", "")
}

/// Parses a JSON body; an empty body means the type's defaults.
fn body<T: DeserializeOwned + Default>(bytes: &Bytes) -> Result<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    Ok(serde_json::from_slice(bytes)?)
}

fn required_body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T> {
    Ok(serde_json::from_slice(bytes)?)
}

fn query_parse<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>> {
    q.get(key)
        .map(|v| v.parse().map_err(|_| LabError::BadRequest(format!("bad value `{v}` for `{key}`"))))
        .transpose()
}

fn graph_id(gid: &str) -> Result<u64> {
    gid.parse().map_err(|_| LabError::not_found("graph", gid))
}

#[derive(Debug, Default, Deserialize)]
struct CreateSession {
    #[serde(default)]
    config: Option<LatticeConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub session: SessionSummary,
}

async fn create_session(State(app): State<Arc<AppState>>, bytes: Bytes) -> Result<(StatusCode, Json<Created>)> {
    let req: CreateSession = body(&bytes)?;
    let session = Session::new(req.config.unwrap_or(app.lattice_config))?;
    let out = Created {
        id: session.id().to_string(),
        session: session.summary(),
    };
    app.insert(session)?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn resume_session(State(app): State<Arc<AppState>>, bytes: Bytes) -> Result<(StatusCode, Json<Created>)> {
    let file: SessionFile = required_body(&bytes)?;
    let session = Session::from_file(&file)?;
    let out = Created {
        id: session.id().to_string(),
        session: session.summary(),
    };
    app.insert(session)?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn session_summary(State(app): State<Arc<AppState>>, Path(sid): Path<String>) -> Result<Json<SessionSummary>> {
    Ok(Json(app.get(&sid)?.read().summary()))
}

/// The event log without uploaded file contents.
async fn history(State(app): State<Arc<AppState>>, Path(sid): Path<String>) -> Result<Json<Vec<serde_json::Value>>> {
    let h = app.get(&sid)?;
    let events = h.read().history().to_vec();
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        let mut v = serde_json::to_value(&e)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("csv");
        }
        out.push(v);
    }
    Ok(Json(out))
}

async fn lattice(State(app): State<Arc<AppState>>, Path(sid): Path<String>) -> Result<Json<LatticeSnapshot>> {
    Ok(Json(app.get(&sid)?.read().lattice().snapshot()))
}

#[derive(Debug, Deserialize)]
pub struct LoadData {
    #[serde(default)]
    pub label: Option<String>,
    pub csv: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, SemanticType>,
    #[serde(default)]
    pub split: SplitSpec,
}

async fn load_data(
    State(app): State<Arc<AppState>>,
    Path(sid): Path<String>,
    bytes: Bytes,
) -> Result<(StatusCode, Json<DatasetSummary>)> {
    let req: LoadData = required_body(&bytes)?;
    let h = app.get(&sid)?;
    let _w = h.writer.lock().await;
    let label = req.label.unwrap_or_else(|| DEFAULT_DATASET.to_string());
    let out = h.write().load_data(&label, &req.csv, &req.overrides, &req.split)?;
    Ok((StatusCode::CREATED, Json(out)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PoolCreated {
    pub pool: String,
    pub summary: PoolSummary,
}

async fn pose_question(
    State(app): State<Arc<AppState>>,
    Path(sid): Path<String>,
    bytes: Bytes,
) -> Result<(StatusCode, Json<PoolCreated>)> {
    let question: Question = required_body(&bytes)?;
    let h = app.get(&sid)?;
    let _w = h.writer.lock().await;
    let mut s = h.write();
    let pool = s.pose_question(&question)?;
    let summary = s.summary().pools.remove(&pool).expect("pool was just created");
    Ok((StatusCode::CREATED, Json(PoolCreated { pool, summary })))
}

async fn pool_summary(
    State(app): State<Arc<AppState>>,
    Path((sid, pid)): Path<(String, String)>,
) -> Result<Json<PoolSummary>> {
    let h = app.get(&sid)?;
    let s = h.read();
    s.pool(&pid)?;
    Ok(Json(s.summary().pools.remove(&pid).expect("pool exists")))
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct FitRequest {
    rounds: usize,
    workers: Option<usize>,
    auto_update: bool,
}

impl Default for FitRequest {
    fn default() -> Self {
        FitRequest {
            rounds: 1,
            workers: None,
            auto_update: false,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitResponse {
    pub pool: String,
    pub rounds: Vec<RoundSummary>,
}

async fn fit(
    State(app): State<Arc<AppState>>,
    Path((sid, pid)): Path<(String, String)>,
    bytes: Bytes,
) -> Result<Json<FitResponse>> {
    let req: FitRequest = body(&bytes)?;
    if req.rounds == 0 || req.rounds > MAX_ROUNDS {
        return Err(LabError::BadRequest(format!("rounds must be between 1 and {MAX_ROUNDS}")));
    }
    let workers = req.workers.unwrap_or(app.workers).max(1);
    let h = app.get(&sid)?;
    let _w = h.writer.lock().await;
    let mut rounds = Vec::with_capacity(req.rounds);
    for _ in 0..req.rounds {
        let job = h.read().prepare_fit(&pid, workers, req.auto_update)?;
        let outcome = tokio::task::spawn_blocking(move || job.run())
            .await
            .map_err(|e| LabError::Io(std::io::Error::other(e.to_string())))??;
        rounds.push(h.write().commit_fit(outcome)?);
    }
    Ok(Json(FitResponse { pool: pid, rounds }))
}

async fn graphs(
    State(app): State<Arc<AppState>>,
    Path((sid, pid)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Vec<GraphSummary>>> {
    let n = query_parse(&q, "n")?.unwrap_or(5);
    Ok(Json(app.get(&sid)?.read().graphs(&pid, n)?))
}

async fn graph(
    State(app): State<Arc<AppState>>,
    Path((sid, pid, gid)): Path<(String, String, String)>,
) -> Result<Json<Member>> {
    Ok(Json(app.get(&sid)?.read().member(&pid, graph_id(&gid)?)?.clone()))
}

async fn equation(
    State(app): State<Arc<AppState>>,
    Path((sid, pid, gid)): Path<(String, String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<EquationView>> {
    let signif = query_parse(&q, "signif")?.unwrap_or(3);
    let format = match q.get("format") {
        Some(f) => f.parse::<Format>()?,
        None => Format::Text,
    };
    Ok(Json(app.get(&sid)?.read().equation(&pid, graph_id(&gid)?, signif, format)?))
}

async fn plot(
    State(app): State<Arc<AppState>>,
    Path((sid, pid, gid, kind)): Path<(String, String, String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<pathlattice::analysis::PlotData>> {
    let kind: PlotKind = kind.parse()?;
    let req = PlotRequest {
        dataset: query_parse::<SplitName>(&q, "dataset")?,
        bins: query_parse(&q, "bins")?,
        x: q.get("x").cloned(),
        y: q.get("y").cloned(),
        by: q.get("by").cloned(),
        resolution: query_parse(&q, "resolution")?,
    };
    let h = app.get(&sid)?;
    let s = h.read();
    if req.dataset == Some(SplitName::Holdout) && !s.holdout_unlocked() {
        return Err(LabError::HoldoutLocked);
    }
    Ok(Json(s.plot(&pid, graph_id(&gid)?, kind, &req)?))
}

#[derive(Debug, Deserialize)]
pub struct UpdateRequest {
    pub pool: String,
    pub graphs: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UpdateResponse {
    pub pool: String,
    pub graphs: Vec<u64>,
    pub structure_hashes: Vec<String>,
}

async fn update(
    State(app): State<Arc<AppState>>,
    Path(sid): Path<String>,
    bytes: Bytes,
) -> Result<Json<UpdateResponse>> {
    let req: UpdateRequest = required_body(&bytes)?;
    let h = app.get(&sid)?;
    let _w = h.writer.lock().await;
    let structure_hashes = h.write().update(&req.pool, &req.graphs)?;
    Ok(Json(UpdateResponse {
        pool: req.pool,
        graphs: req.graphs,
        structure_hashes,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Unlocked {
    pub holdout_unlocked: bool,
    pub changed: bool,
}

async fn unlock_holdout(State(app): State<Arc<AppState>>, Path(sid): Path<String>) -> Result<Json<Unlocked>> {
    let h = app.get(&sid)?;
    let _w = h.writer.lock().await;
    let changed = h.write().unlock_holdout();
    Ok(Json(Unlocked {
        holdout_unlocked: true,
        changed,
    }))
}

async fn save(State(app): State<Arc<AppState>>, Path(sid): Path<String>) -> Result<Json<SessionFile>> {
    let h = app.get(&sid)?;
    let _w = h.writer.lock().await;
    let file = h.read().to_file()?;
    Ok(Json(file))
}
