//! HTTP advisor service. Each session tracks one project week by week: the
//! client posts the week's estimate, receives a recommendation with the
//! belief and per-action values, then posts the announcement actually made.

pub mod error;
pub mod registry;
pub mod session;

use std::collections::HashMap;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use uuid::Uuid;

use announce_core::{PolicyKind, ProblemConfig, Weeks};

pub use error::{ErrorBody, ServiceError};
pub use registry::{PolicyInfo, PolicyRegistry, ON_DEMAND_STATE_LIMIT};
pub use session::{Candidate, Recommendation, Session, SessionSnapshot, SessionView, StepRecord};

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct CreateSession {
    #[serde(default)]
    pub config: Option<ProblemConfig>,
    #[serde(default)]
    pub config_name: Option<String>,
    pub policy: String,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct Created {
    pub id: Uuid,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ObserveRequest {
    pub estimate: Weeks,
    #[serde(default)]
    pub completed: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct AnnounceRequest {
    pub announce: Weeks,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct Snapshot {
    pub sessions: Vec<SessionSnapshot>,
}

/// Shared service state: immutable-once-loaded policies and the session table.
#[derive(Default)]
pub struct AppState {
    registry: PolicyRegistry,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>,
}

type Shared = Arc<AppState>;

impl AppState {
    pub fn new(registry: PolicyRegistry) -> Self {
        Self {
            registry,
            sessions: RwLock::default(),
        }
    }

    pub fn registry(&self) -> &PolicyRegistry {
        &self.registry
    }

    fn session(&self, id: Uuid) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(&id)
            .cloned()
            .ok_or(ServiceError::SessionNotFound(id))
    }

    /// Creates a session; may solve a policy, so call off the async runtime.
    pub fn create_session(&self, req: &CreateSession) -> Result<Uuid, ServiceError> {
        let (config, name) = match (&req.config, &req.config_name) {
            (Some(c), None) => (c.clone(), None),
            (None, Some(n)) => (
                ProblemConfig::preset(n).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?,
                Some(n.clone()),
            ),
            _ => {
                return Err(ServiceError::InvalidRequest(
                    "give exactly one of `config` or `config_name`".into(),
                ))
            }
        };
        config
            .validate()
            .map_err(|e| ServiceError::InvalidRequest(e.to_string()))?;
        let kind = PolicyKind::from_str(&req.policy).map_err(|e| ServiceError::UnknownPolicy(e.to_string()))?;
        let policy = self.registry.resolve(kind, &config)?;
        let model = self.registry.model(&config)?;
        let id = Uuid::new_v4();
        let session = Session::new(id, name, model, policy);
        self.sessions
            .write()
            .expect("session table lock")
            .insert(id, Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn view(&self, id: Uuid) -> Result<SessionView, ServiceError> {
        Ok(self.session(id)?.lock().expect("session lock").view())
    }

    pub fn observe(&self, id: Uuid, req: &ObserveRequest) -> Result<Recommendation, ServiceError> {
        self.session(id)?
            .lock()
            .expect("session lock")
            .observe(req.estimate, req.completed)
    }

    pub fn announce(&self, id: Uuid, req: &AnnounceRequest) -> Result<SessionView, ServiceError> {
        let session = self.session(id)?;
        let mut s = session.lock().expect("session lock");
        s.announce(req.announce)?;
        Ok(s.view())
    }

    pub fn snapshot(&self) -> Snapshot {
        let table = self.sessions.read().expect("session table lock");
        let mut sessions: Vec<SessionSnapshot> = table
            .values()
            .map(|s| s.lock().expect("session lock").snapshot())
            .collect();
        sessions.sort_by_key(|s| s.id);
        Snapshot { sessions }
    }

    /// Replays saved sessions. Sessions whose policy is no longer available
    /// are dropped with a warning.
    pub fn restore(&self, snapshot: &Snapshot) -> usize {
        let mut restored = 0;
        for snap in &snapshot.sessions {
            let rebuilt = self
                .registry
                .resolve(snap.policy, &snap.config)
                .and_then(|p| Ok((p, self.registry.model(&snap.config)?)))
                .and_then(|(p, m)| Session::replay(snap, m, p));
            match rebuilt {
                Ok(s) => {
                    self.sessions
                        .write()
                        .expect("session table lock")
                        .insert(s.id(), Arc::new(Mutex::new(s)));
                    restored += 1;
                }
                Err(e) => tracing::warn!(id = %snap.id, error = %e, "could not restore session"),
            }
        }
        restored
    }
}

async fn blocking<R: Send + 'static>(
    f: impl FnOnce() -> Result<R, ServiceError> + Send + 'static,
) -> Result<R, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn create(State(state): State<Shared>, Json(req): Json<CreateSession>) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let id = blocking(move || state.create_session(&req)).await?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn show(State(state): State<Shared>, UrlPath(id): UrlPath<Uuid>) -> Result<Json<SessionView>, ServiceError> {
    state.view(id).map(Json)
}

async fn observe(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<Uuid>,
    Json(req): Json<ObserveRequest>,
) -> Result<Json<Recommendation>, ServiceError> {
    blocking(move || state.observe(id, &req)).await.map(Json)
}

async fn announce(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<Uuid>,
    Json(req): Json<AnnounceRequest>,
) -> Result<Json<SessionView>, ServiceError> {
    blocking(move || state.announce(id, &req)).await.map(Json)
}

async fn policies(State(state): State<Shared>) -> Json<Vec<PolicyInfo>> {
    Json(state.registry.list())
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/observe", post(observe))
        .route("/sessions/{id}/announce", post(announce))
        .route("/policies", get(policies))
        .route("/healthz", get(healthz))
        .with_state(state)
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub policies_dir: Option<PathBuf>,
    /// Sessions are restored from here at startup and written back on shutdown.
    pub snapshot: Option<PathBuf>,
}

pub fn load_state(options: &ServeOptions) -> std::io::Result<Shared> {
    let registry = match &options.policies_dir {
        Some(dir) => PolicyRegistry::load_dir(dir)?,
        None => PolicyRegistry::default(),
    };
    let state = Arc::new(AppState::new(registry));
    if let Some(path) = options.snapshot.as_deref().filter(|p| p.exists()) {
        let snap: Snapshot = serde_json::from_slice(&std::fs::read(path)?)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let n = state.restore(&snap);
        tracing::info!(restored = n, path = %path.display(), "restored sessions");
    }
    Ok(state)
}

pub fn write_snapshot(state: &AppState, path: &Path) -> std::io::Result<()> {
    let text = serde_json::to_vec_pretty(&state.snapshot()).map_err(std::io::Error::other)?;
    std::fs::write(path, text)
}

/// Serves until `shutdown` resolves, then writes the snapshot if one is
/// configured.
pub async fn serve(
    listener: TcpListener,
    options: ServeOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let state = load_state(&options)?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    if let Some(path) = &options.snapshot {
        write_snapshot(&state, path)?;
        tracing::info!(path = %path.display(), "wrote session snapshot");
    }
    Ok(())
}
