//! Session service: each session owns one simulation engine. Writes to a session are serialized
//! through its lock; every change is pushed to stream subscribers as a frame.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use wayfinder_core::data;
use wayfinder_core::dialogue::DialogueMode;
use wayfinder_core::grounding::Method;
use wayfinder_core::nlu::NluModel;
use wayfinder_core::sim::{Engine, Resources, SimConfig};
use wayfinder_core::world::{Pose2D, Scene};

pub mod view;

pub use view::{Delta, Frame, LiveMetrics, SessionView, SimView, UtteranceReply};

/// Simulation steps per streamed frame.
pub const FRAME_STEPS: u64 = 10;
/// Most steps one advance request may run.
pub const MAX_ADVANCE: u64 = 3000;
const CHANNEL_CAPACITY: usize = 1024;

/// (method, path) of every endpoint; kept in step with docs/api.json by a test.
pub const ROUTES: &[(&str, &str)] = &[
    ("get", "/health"),
    ("get", "/scenes"),
    ("get", "/scenes/{id}"),
    ("get", "/sessions"),
    ("post", "/sessions"),
    ("get", "/sessions/{id}"),
    ("delete", "/sessions/{id}"),
    ("post", "/sessions/{id}/utterance"),
    ("post", "/sessions/{id}/advance"),
    ("get", "/sessions/{id}/stream"),
];

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, error) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
        };
        (code, Json(ErrorBody { error })).into_response()
    }
}

struct Live {
    eng: Engine,
    seq: u64,
    sent: usize,
    closed: bool,
}

pub struct Session {
    pub id: u64,
    pub scene: String,
    pub method: Method,
    pub seed: u64,
    live: tokio::sync::Mutex<Live>,
    tx: broadcast::Sender<Frame>,
}

impl Session {
    fn view(&self, live: &Live) -> SessionView {
        SessionView {
            id: self.id,
            scene: self.scene.clone(),
            method: self.method,
            seed: self.seed,
            sim: view::sim_view(&live.eng, live.seq),
            transcript: live.eng.session.transcript.clone(),
        }
    }

    /// Pushes everything that changed since the last frame.
    fn publish(&self, live: &mut Live) {
        live.seq += 1;
        let transcript = live.eng.session.transcript[live.sent..].to_vec();
        live.sent = live.eng.session.transcript.len();
        let _ = self.tx.send(Frame::Delta(Delta { sim: view::sim_view(&live.eng, live.seq), transcript }));
    }

    fn advance(&self, live: &mut Live, steps: u64) {
        let mut left = steps;
        while left > 0 {
            let batch = left.min(FRAME_STEPS);
            for _ in 0..batch {
                live.eng.tick();
            }
            left -= batch;
            self.publish(live);
        }
    }
}

pub struct AppState {
    sessions: Mutex<BTreeMap<u64, Arc<Session>>>,
    next_id: AtomicU64,
    nlu: NluModel,
    resources: Mutex<HashMap<(String, Method), Arc<Resources>>>,
}

impl Default for AppState {
    fn default() -> Self {
        Self::new()
    }
}

impl AppState {
    pub fn new() -> Self {
        AppState {
            sessions: Mutex::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            nlu: data::shipped_nlu(),
            resources: Mutex::new(HashMap::new()),
        }
    }

    fn session(&self, id: u64) -> Result<Arc<Session>, ApiError> {
        self.sessions.lock().expect("session table").get(&id).cloned().ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    fn resources(&self, scene: Scene, method: Method) -> Arc<Resources> {
        let key = (scene.name.clone(), method);
        let mut cache = self.resources.lock().expect("resource cache");
        Arc::clone(cache.entry(key).or_insert_with(|| Arc::new(data::shipped_resources_with(scene, method, self.nlu.clone()))))
    }
}

pub const SCENES: [&str; 2] = ["dragon_lab", "narrow_corridor"];

fn default_method() -> String {
    "clip".into()
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub scene: String,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Start pose; defaults to the scene's first route start.
    #[serde(default)]
    pub start: Option<Pose2D>,
    #[serde(default)]
    pub user_polygon: Option<bool>,
    /// If set, the simulation runs by itself at this multiple of real time.
    #[serde(default)]
    pub autoplay: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Advance {
    #[serde(default = "default_advance")]
    pub steps: u64,
}

fn default_advance() -> u64 {
    FRAME_STEPS
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/scenes", get(list_scenes))
        .route("/scenes/{id}", get(get_scene))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/utterance", post(utterance))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

async fn list_scenes() -> Json<Vec<&'static str>> {
    Json(SCENES.to_vec())
}

async fn get_scene(Path(id): Path<String>) -> Result<Response, ApiError> {
    let scene = data::builtin_scene(&id).ok_or_else(|| ApiError::NotFound(format!("unknown scene {id:?}")))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], scene.to_json()).into_response())
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Vec<u64>> {
    Json(app.sessions.lock().expect("session table").keys().copied().collect())
}

async fn create_session(State(app): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let scene = data::builtin_scene(&req.scene).ok_or_else(|| ApiError::NotFound(format!("unknown scene {:?}", req.scene)))?;
    let method: Method = req.method.parse().map_err(|e| ApiError::BadRequest(format!("{e}")))?;
    let start = req
        .start
        .or_else(|| scene.routes.first().map(|r| r.start))
        .ok_or_else(|| ApiError::BadRequest("scene has no routes; give a start pose".into()))?;
    if !scene.grid.is_free_at(start.position()) {
        return Err(ApiError::BadRequest("start pose is not in free space".into()));
    }
    if let Some(rate) = req.autoplay {
        if !(rate > 0.0 && rate <= 100.0) {
            return Err(ApiError::BadRequest("autoplay must be in (0, 100]".into()));
        }
    }
    let cfg = SimConfig { seed: req.seed, user_polygon: req.user_polygon.unwrap_or(true), ..SimConfig::default() };
    let dt = cfg.dt;
    let name = scene.name.clone();
    let eng = Engine::new(app.resources(scene, method), cfg, start);
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
    let session = Arc::new(Session {
        id,
        scene: name,
        method,
        seed: req.seed,
        live: tokio::sync::Mutex::new(Live { eng, seq: 0, sent: 0, closed: false }),
        tx,
    });
    if let Some(rate) = req.autoplay {
        tokio::spawn(autoplay(Arc::downgrade(&session), Duration::from_secs_f64(FRAME_STEPS as f64 * dt / rate)));
    }
    app.sessions.lock().expect("session table").insert(id, session);
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn autoplay(session: Weak<Session>, every: Duration) {
    let mut timer = tokio::time::interval(every);
    timer.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    loop {
        timer.tick().await;
        let Some(s) = session.upgrade() else { return };
        let mut live = s.live.lock().await;
        if live.closed {
            return;
        }
        let moving = matches!(live.eng.mode(), DialogueMode::Navigating) || live.eng.state.robot_vel.v > 0.0;
        if moving {
            s.advance(&mut live, FRAME_STEPS);
        }
    }
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Json<SessionView>, ApiError> {
    let s = app.session(id)?;
    let live = s.live.lock().await;
    Ok(Json(s.view(&live)))
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    let s = app.sessions.lock().expect("session table").remove(&id).ok_or_else(|| ApiError::NotFound(format!("no session {id}")))?;
    let mut live = s.live.lock().await;
    live.closed = true;
    let _ = s.tx.send(Frame::Closed { reason: "session deleted".into() });
    Ok(StatusCode::NO_CONTENT)
}

async fn utterance(State(app): State<Arc<AppState>>, Path(id): Path<u64>, Json(u): Json<Utterance>) -> Result<Json<UtteranceReply>, ApiError> {
    let s = app.session(id)?;
    // The lock is fair, so concurrent posts are handled in arrival order.
    let mut live = s.live.lock().await;
    let turn = live.eng.utterance(&u.text);
    s.publish(&mut live);
    Ok(Json(UtteranceReply { reply: turn.reply, mode: turn.mode, effects: turn.effects }))
}

async fn advance(State(app): State<Arc<AppState>>, Path(id): Path<u64>, Json(a): Json<Advance>) -> Result<Json<SessionView>, ApiError> {
    if a.steps > MAX_ADVANCE {
        return Err(ApiError::BadRequest(format!("at most {MAX_ADVANCE} steps per request")));
    }
    let s = app.session(id)?;
    let mut live = s.live.lock().await;
    s.advance(&mut live, a.steps);
    Ok(Json(s.view(&live)))
}

async fn stream(ws: WebSocketUpgrade, State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let s = app.session(id)?;
    Ok(ws.on_upgrade(move |socket| pump(socket, s)))
}

fn text(frame: &Frame) -> Message {
    Message::Text(serde_json::to_string(frame).expect("frame serializes").into())
}

/// Snapshot first, then every frame, taken under the session lock so nothing is missed.
async fn subscribe(s: &Session) -> (Frame, broadcast::Receiver<Frame>, bool) {
    let live = s.live.lock().await;
    (Frame::Snapshot(s.view(&live)), s.tx.subscribe(), live.closed)
}

async fn pump(mut socket: WebSocket, s: Arc<Session>) {
    let close = |reason: &str| {
        Message::Close(Some(CloseFrame { code: axum::extract::ws::close_code::NORMAL, reason: reason.to_owned().into() }))
    };
    let (snapshot, mut rx, closed) = subscribe(&s).await;
    if socket.send(text(&snapshot)).await.is_err() {
        return;
    }
    if closed {
        let _ = socket.send(close("session deleted")).await;
        return;
    }
    loop {
        tokio::select! {
            frame = rx.recv() => match frame {
                Ok(f @ Frame::Closed { .. }) => {
                    let _ = socket.send(text(&f)).await;
                    let _ = socket.send(close("session deleted")).await;
                    return;
                }
                Ok(f) => {
                    if socket.send(text(&f)).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    // Too slow to keep up: start over from a fresh snapshot.
                    let (snapshot, fresh, _) = subscribe(&s).await;
                    rx = fresh;
                    if socket.send(text(&snapshot)).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            msg = socket.recv() => match msg {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
